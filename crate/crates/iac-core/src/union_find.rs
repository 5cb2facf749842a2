//! Disjoint-set structure with per-component vertex and edge counts, used
//! to police the one-loop-per-subgraph bound during graph construction.

/// Union-find over `0..n` with path compression and union by size.
///
/// Each component tracks how many edges have been committed into it, so the
/// loop bound `|E_q| <= |P_q|` can be checked before an edge is added.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
    edges: Vec<usize>,
}

/// What happened structurally when an edge was committed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeOutcome {
    /// The endpoints were in different components; they are now one.
    Merged,
    /// The endpoints already shared a component; a cycle was closed.
    ClosedLoop,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
            edges: vec![0; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Vertices in the component of `x`.
    pub fn component_size(&mut self, x: usize) -> usize {
        let root = self.find(x);
        self.size[root]
    }

    /// Edges committed into the component of `x`.
    pub fn component_edges(&mut self, x: usize) -> usize {
        let root = self.find(x);
        self.edges[root]
    }

    /// Would adding edge `(a, b)` keep the affected component within the
    /// one-loop bound `edges <= vertices`?
    pub fn edge_keeps_loop_bound(&mut self, a: usize, b: usize) -> bool {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra == rb {
            self.edges[ra] + 1 <= self.size[ra]
        } else {
            self.edges[ra] + self.edges[rb] + 1 <= self.size[ra] + self.size[rb]
        }
    }

    /// Commits edge `(a, b)`, merging components if needed.
    pub fn add_edge(&mut self, a: usize, b: usize) -> EdgeOutcome {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra == rb {
            self.edges[ra] += 1;
            EdgeOutcome::ClosedLoop
        } else {
            let (big, small) = if self.size[ra] >= self.size[rb] {
                (ra, rb)
            } else {
                (rb, ra)
            };
            self.parent[small] = big;
            self.size[big] += self.size[small];
            self.edges[big] += self.edges[small] + 1;
            EdgeOutcome::Merged
        }
    }

    /// Number of distinct components.
    pub fn component_count(&mut self) -> usize {
        let n = self.parent.len();
        (0..n).filter(|&i| self.find(i) == i).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_and_loop_bookkeeping() {
        let mut uf = UnionFind::new(4);
        assert_eq!(uf.add_edge(0, 1), EdgeOutcome::Merged);
        assert_eq!(uf.add_edge(2, 3), EdgeOutcome::Merged);
        assert_eq!(uf.component_count(), 2);
        assert_eq!(uf.add_edge(1, 2), EdgeOutcome::Merged);
        assert_eq!(uf.component_size(0), 4);
        assert_eq!(uf.component_edges(0), 3);
        // Close the single allowed loop.
        assert!(uf.edge_keeps_loop_bound(0, 3));
        assert_eq!(uf.add_edge(0, 3), EdgeOutcome::ClosedLoop);
        // A second loop must be rejected by the bound.
        assert!(!uf.edge_keeps_loop_bound(0, 2));
    }

    #[test]
    fn clone_snapshots_are_independent() {
        let mut uf = UnionFind::new(3);
        uf.add_edge(0, 1);
        let snapshot = uf.clone();
        uf.add_edge(1, 2);
        assert_eq!(uf.component_count(), 1);
        let mut restored = snapshot;
        assert_eq!(restored.component_count(), 2);
    }
}
