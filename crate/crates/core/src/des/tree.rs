/// Binary sum tree over per-triangle total rates. Parent sums are always
/// recomputed from their children, so there is no accumulated drift.
#[derive(Debug, Clone)]
pub(crate) struct SumTree {
    size: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    pub fn new(values: &[f64]) -> Self {
        let size = values.len().next_power_of_two().max(1);
        let mut nodes = vec![0.0; 2 * size];
        nodes[size..size + values.len()].copy_from_slice(values);
        for i in (1..size).rev() {
            nodes[i] = nodes[2 * i] + nodes[2 * i + 1];
        }
        Self { size, nodes }
    }

    pub fn total(&self) -> f64 {
        self.nodes[1]
    }

    #[cfg(test)]
    pub fn get(&self, i: usize) -> f64 {
        self.nodes[self.size + i]
    }

    pub fn set(&mut self, i: usize, v: f64) {
        let mut k = self.size + i;
        self.nodes[k] = v;
        while k > 1 {
            k /= 2;
            self.nodes[k] = self.nodes[2 * k] + self.nodes[2 * k + 1];
        }
    }

    /// Leaf index `i` with `prefix(i) <= u < prefix(i) + value(i)` and the
    /// offset of `u` inside that leaf. Requires `0 <= u < total()`.
    pub fn find(&self, mut u: f64) -> (usize, f64) {
        if self.size == 1 {
            return (0, u);
        }
        let mut k = 1;
        while k < self.size {
            let left = self.nodes[2 * k];
            if u < left {
                k *= 2;
            } else {
                u -= left;
                k = 2 * k + 1;
            }
        }
        (k - self.size, u)
    }
}
