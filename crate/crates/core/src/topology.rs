//! Radio visibility: which pairs are close, which are merely in range.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::types::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SignalClass {
    Close,
    Far,
    OutOfRange,
}

/// Pair relation used by the enumerator: one value per unordered pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    Absent,
    Close,
    Range,
}

/// Static radio topology over nodes `1..=n`.
///
/// `close` and `range` are stored as normalized `(low, high)` pairs, so both
/// relations are symmetric and irreflexive by construction.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Topology {
    n: u32,
    close: BTreeSet<(u32, u32)>,
    range: BTreeSet<(u32, u32)>,
    adjacency: Vec<Vec<(NodeId, SignalClass)>>,
}

fn norm(a: u32, b: u32) -> (u32, u32) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl Topology {
    pub fn new(n: u32, close: &[(u32, u32)], range: &[(u32, u32)]) -> Result<Topology> {
        if n == 0 {
            return Err(Error::Topology("node count must be at least 1".into()));
        }
        let mut cl = BTreeSet::new();
        let mut rg = BTreeSet::new();
        for (set, pairs, name) in [(&mut cl, close, "close"), (&mut rg, range, "range")] {
            for &(a, b) in pairs {
                if a == 0 || b == 0 || a > n || b > n {
                    return Err(Error::Topology(format!(
                        "{name} pair ({a},{b}) references a node outside 1..={n}"
                    )));
                }
                if a == b {
                    return Err(Error::Topology(format!("{name} pair ({a},{b}) is reflexive")));
                }
                set.insert(norm(a, b));
            }
        }
        if let Some(&(a, b)) = cl.intersection(&rg).next() {
            return Err(Error::Topology(format!(
                "pair ({a},{b}) is both close and in range; the relations must be disjoint"
            )));
        }
        let mut adjacency = vec![Vec::new(); n as usize];
        for &(a, b) in &cl {
            adjacency[(a - 1) as usize].push((NodeId(b), SignalClass::Close));
            adjacency[(b - 1) as usize].push((NodeId(a), SignalClass::Close));
        }
        for &(a, b) in &rg {
            adjacency[(a - 1) as usize].push((NodeId(b), SignalClass::Far));
            adjacency[(b - 1) as usize].push((NodeId(a), SignalClass::Far));
        }
        for adj in &mut adjacency {
            adj.sort_by_key(|(id, _)| *id);
        }
        Ok(Topology {
            n,
            close: cl,
            range: rg,
            adjacency,
        })
    }

    pub fn node_count(&self) -> u32 {
        self.n
    }

    pub fn close_pairs(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.close.iter().copied()
    }

    pub fn range_pairs(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.range.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.close.len() + self.range.len()
    }

    /// Neighbours of `id` with their signal class, ordered by id.
    pub fn neighbours(&self, id: NodeId) -> &[(NodeId, SignalClass)] {
        &self.adjacency[id.index()]
    }

    fn check(&self, id: NodeId) -> Result<()> {
        if id.0 == 0 || id.0 > self.n {
            Err(Error::NodeOutOfRange(id))
        } else {
            Ok(())
        }
    }

    pub fn classify(&self, sender: NodeId, receiver: NodeId) -> Result<SignalClass> {
        self.check(sender)?;
        self.check(receiver)?;
        if sender == receiver {
            return Err(Error::Domain("a node cannot classify itself".into()));
        }
        Ok(self.class_of(sender, receiver))
    }

    /// Unchecked classification used on hot paths; ids must be valid.
    pub(crate) fn class_of(&self, sender: NodeId, receiver: NodeId) -> SignalClass {
        let adj = &self.adjacency[receiver.index()];
        match adj.binary_search_by_key(&sender, |(id, _)| *id) {
            Ok(pos) => adj[pos].1,
            Err(_) => SignalClass::OutOfRange,
        }
    }

    pub fn reachable(&self, a: NodeId, b: NodeId) -> bool {
        a != b && self.class_of(a, b) != SignalClass::OutOfRange
    }

    pub fn is_well_connected(&self) -> bool {
        let n = self.n as usize;
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for (w, _) in &self.adjacency[v] {
                if !seen[w.index()] {
                    seen[w.index()] = true;
                    stack.push(w.index());
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Builds a topology from one `Link` per unordered pair, pairs in
    /// lexicographic order `(1,2), (1,3), …, (n-1,n)`.
    pub fn from_links(n: u32, links: &[Link]) -> Result<Topology> {
        let pairs = all_pairs(n);
        if pairs.len() != links.len() {
            return Err(Error::Topology(format!(
                "expected {} pair links, got {}",
                pairs.len(),
                links.len()
            )));
        }
        let mut close = Vec::new();
        let mut range = Vec::new();
        for (&p, &l) in pairs.iter().zip(links) {
            match l {
                Link::Absent => {}
                Link::Close => close.push(p),
                Link::Range => range.push(p),
            }
        }
        Topology::new(n, &close, &range)
    }
}

/// Unordered pairs over `1..=n` in lexicographic order.
pub fn all_pairs(n: u32) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    for a in 1..=n {
        for b in (a + 1)..=n {
            out.push((a, b));
        }
    }
    out
}

pub const ENUMERATION_LIMIT: u32 = 4;

/// Every well-connected topology over `n` labelled nodes, in lexicographic
/// order of pair assignments (`Absent < Close < Range`, first pair most significant).
pub fn enumerate_well_connected(n: u32) -> Result<Vec<Topology>> {
    if n == 0 {
        return Err(Error::Topology("node count must be at least 1".into()));
    }
    if n > ENUMERATION_LIMIT {
        return Err(Error::Limit(format!(
            "enumeration supports at most {ENUMERATION_LIMIT} nodes, got {n}"
        )));
    }
    let m = all_pairs(n).len();
    let total = 3usize.pow(m as u32);
    let mut out = Vec::new();
    let mut links = vec![Link::Absent; m];
    for code in 0..total {
        let mut c = code;
        for slot in links.iter_mut().rev() {
            *slot = match c % 3 {
                0 => Link::Absent,
                1 => Link::Close,
                _ => Link::Range,
            };
            c /= 3;
        }
        let t = Topology::from_links(n, &links)?;
        if t.is_well_connected() {
            out.push(t);
        }
    }
    Ok(out)
}

/// Full balanced binary tree of height `h` in level order: node `i` has
/// children `2i` and `2i+1`; every parent/child edge is `range`.
pub fn balanced_binary_tree(h: u32) -> Result<Topology> {
    if h > 20 {
        return Err(Error::Limit(format!("tree height {h} exceeds 20")));
    }
    let n = (1u32 << (h + 1)) - 1;
    let range: Vec<(u32, u32)> = (2..=n).map(|c| (c / 2, c)).collect();
    Topology::new(n, &[], &range)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn narrow_bridge() -> Topology {
        Topology::new(3, &[(1, 2)], &[(2, 3)]).unwrap()
    }

    #[test]
    fn classify_narrow_bridge() {
        let t = narrow_bridge();
        assert_eq!(t.classify(NodeId(1), NodeId(2)).unwrap(), SignalClass::Close);
        assert_eq!(t.classify(NodeId(2), NodeId(3)).unwrap(), SignalClass::Far);
        assert_eq!(t.classify(NodeId(1), NodeId(3)).unwrap(), SignalClass::OutOfRange);
        assert_eq!(t.classify(NodeId(3), NodeId(2)).unwrap(), SignalClass::Far);
    }

    #[test]
    fn classify_rejects_bad_ids() {
        let t = narrow_bridge();
        assert_eq!(t.classify(NodeId(4), NodeId(1)), Err(Error::NodeOutOfRange(NodeId(4))));
        assert!(t.classify(NodeId(0), NodeId(1)).is_err());
        assert!(t.classify(NodeId(2), NodeId(2)).is_err());
    }

    #[test]
    fn connectivity_examples() {
        assert!(Topology::new(3, &[], &[(1, 2), (1, 3)]).unwrap().is_well_connected());
        assert!(!Topology::new(3, &[(1, 2)], &[]).unwrap().is_well_connected());
        assert!(Topology::new(1, &[], &[]).unwrap().is_well_connected());
    }

    #[test]
    fn construction_rejects_overlap_and_bad_pairs() {
        assert!(Topology::new(3, &[(1, 2)], &[(2, 1)]).is_err());
        assert!(Topology::new(3, &[(1, 9)], &[]).is_err());
        assert!(Topology::new(3, &[(2, 2)], &[]).is_err());
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(enumerate_well_connected(1).unwrap().len(), 1);
        assert_eq!(enumerate_well_connected(2).unwrap().len(), 2);
        assert!(matches!(enumerate_well_connected(5), Err(Error::Limit(_))));
    }

    #[test]
    fn enumeration_matches_brute_force_for_three_nodes() {
        // Independent oracle: a 3-node graph is connected iff it has at least
        // two of the three possible edges.
        let mut expected = Vec::new();
        for a in 0..3u32 {
            for b in 0..3u32 {
                for c in 0..3u32 {
                    let present = [a, b, c].iter().filter(|&&x| x != 0).count();
                    if present >= 2 {
                        expected.push([a, b, c]);
                    }
                }
            }
        }
        let got = enumerate_well_connected(3).unwrap();
        assert_eq!(got.len(), expected.len());
        assert_eq!(got.len(), 20);
        let pairs = all_pairs(3);
        for (t, codes) in got.iter().zip(&expected) {
            for (&(x, y), &code) in pairs.iter().zip(codes.iter()) {
                let cls = t.class_of(NodeId(x), NodeId(y));
                let want = match code {
                    0 => SignalClass::OutOfRange,
                    1 => SignalClass::Close,
                    _ => SignalClass::Far,
                };
                assert_eq!(cls, want);
            }
        }
    }

    #[test]
    fn binary_tree_shapes() {
        let t0 = balanced_binary_tree(0).unwrap();
        assert_eq!(t0.node_count(), 1);
        assert_eq!(t0.edge_count(), 0);
        let t1 = balanced_binary_tree(1).unwrap();
        assert_eq!(t1, Topology::new(3, &[], &[(1, 2), (1, 3)]).unwrap());
        for h in 0..6 {
            let t = balanced_binary_tree(h).unwrap();
            let n = (1u32 << (h + 1)) - 1;
            assert_eq!(t.node_count(), n);
            assert_eq!(t.edge_count() as u32, n - 1);
            assert_eq!(t.close_pairs().count(), 0);
            for i in 1..=n {
                let kids: Vec<u32> = t
                    .neighbours(NodeId(i))
                    .iter()
                    .map(|(id, _)| id.0)
                    .filter(|&c| c > i)
                    .collect();
                if 2 * i <= n {
                    assert_eq!(kids, vec![2 * i, 2 * i + 1]);
                } else {
                    assert!(kids.is_empty());
                }
            }
            assert_eq!(diameter(&t), 2 * h);
        }
    }

    fn diameter(t: &Topology) -> u32 {
        let n = t.node_count() as usize;
        let mut best = 0;
        for s in 0..n {
            let mut dist = vec![u32::MAX; n];
            dist[s] = 0;
            let mut q = std::collections::VecDeque::from([s]);
            while let Some(v) = q.pop_front() {
                for (w, _) in t.neighbours(NodeId::from_index(v)) {
                    if dist[w.index()] == u32::MAX {
                        dist[w.index()] = dist[v] + 1;
                        q.push_back(w.index());
                    }
                }
            }
            best = best.max(*dist.iter().max().unwrap());
        }
        best
    }
}
