use std::collections::HashSet;

/// Undirected user graph that starts complete and only loses edges.
///
/// Stored as the complement: for every user the set of users it has been
/// disconnected from. Memory is proportional to the number of deletions.
#[derive(Debug, Clone)]
pub struct UserGraph {
    users: usize,
    deleted: Vec<HashSet<usize>>,
    deleted_count: usize,
    /// Component label per user, valid until the next deletion.
    components: Option<Vec<usize>>,
}

impl UserGraph {
    pub fn complete(users: usize) -> Self {
        Self {
            users,
            deleted: vec![HashSet::new(); users],
            deleted_count: 0,
            components: None,
        }
    }

    pub fn user_count(&self) -> usize {
        self.users
    }

    pub fn deleted_count(&self) -> usize {
        self.deleted_count
    }

    pub fn edge_count(&self) -> usize {
        self.users * self.users.saturating_sub(1) / 2 - self.deleted_count
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        a != b && a < self.users && b < self.users && !self.deleted[a].contains(&b)
    }

    /// Removes edge `(a, b)`. Returns whether it was present.
    pub fn delete(&mut self, a: usize, b: usize) -> bool {
        if !self.has_edge(a, b) {
            return false;
        }
        self.deleted[a].insert(b);
        self.deleted[b].insert(a);
        self.deleted_count += 1;
        self.components = None;
        true
    }

    /// Deleted pairs as `(low, high)`, sorted.
    pub fn deleted_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs: Vec<_> = self
            .deleted
            .iter()
            .enumerate()
            .flat_map(|(a, set)| set.iter().filter(move |&&b| a < b).map(move |&b| (a, b)))
            .collect();
        pairs.sort_unstable();
        pairs
    }

    pub fn neighbors(&self, user: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.users).filter(move |&l| l != user && !self.deleted[user].contains(&l))
    }

    /// `user` together with its direct neighbors, ascending.
    pub fn one_hop(&self, user: usize) -> Vec<usize> {
        (0..self.users)
            .filter(|&l| l == user || !self.deleted[user].contains(&l))
            .collect()
    }

    /// Connected component containing `user`, ascending.
    pub fn component(&mut self, user: usize) -> Vec<usize> {
        let labels = self.components.get_or_insert_with(|| label_components(self.users, &self.deleted));
        let target = labels[user];
        labels
            .iter()
            .enumerate()
            .filter(|&(_, &c)| c == target)
            .map(|(l, _)| l)
            .collect()
    }
}

/// Breadth-first search over the complement representation: each popped
/// vertex claims every still-unvisited vertex it is not disconnected from.
fn label_components(users: usize, deleted: &[HashSet<usize>]) -> Vec<usize> {
    let mut label = vec![usize::MAX; users];
    let mut unvisited: Vec<usize> = (0..users).collect();
    let mut next = 0;
    while let Some(root) = unvisited.first().copied() {
        unvisited.swap_remove(0);
        label[root] = next;
        let mut queue = vec![root];
        while let Some(v) = queue.pop() {
            let mut keep = Vec::with_capacity(unvisited.len());
            for w in unvisited.drain(..) {
                if deleted[v].contains(&w) {
                    keep.push(w);
                } else {
                    label[w] = next;
                    queue.push(w);
                }
            }
            unvisited = keep;
        }
        unvisited.sort_unstable();
        next += 1;
    }
    label
}
