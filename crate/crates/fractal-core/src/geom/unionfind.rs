//! Disjoint-set forest with union by size and path halving.

/// Union-find over `0..n`.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
    components: usize,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        assert!(n <= u32::MAX as usize, "union-find limited to u32 indices");
        UnionFind {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
            components: n,
        }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        loop {
            let p = self.parent[x] as usize;
            if p == x {
                return x;
            }
            let gp = self.parent[p];
            self.parent[x] = gp;
            x = gp as usize;
        }
    }

    /// Join the sets containing `a` and `b`; returns true when they were
    /// previously separate.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra as u32;
        self.size[ra] += self.size[rb];
        self.components -= 1;
        true
    }

    pub fn same(&mut self, a: usize, b: usize) -> bool {
        self.find(a) == self.find(b)
    }

    pub fn component_count(&self) -> usize {
        self.components
    }

    /// Group element indices by root. Groups are ordered by their smallest
    /// member and each group lists members in increasing order, so the
    /// output is independent of union order.
    pub fn groups(&mut self) -> Vec<Vec<usize>> {
        let n = self.len();
        let mut by_root: Vec<(usize, usize)> = (0..n).map(|i| (self.find(i), i)).collect();
        by_root.sort_unstable();
        let mut out: Vec<Vec<usize>> = Vec::with_capacity(self.components);
        let mut last_root = usize::MAX;
        for (root, i) in by_root {
            if root != last_root {
                out.push(Vec::new());
                last_root = root;
            }
            out.last_mut().unwrap().push(i);
        }
        // Order groups by smallest member (first element, already minimal
        // per group since members are sorted).
        out.sort_unstable_by_key(|g| g[0]);
        out
    }
}
