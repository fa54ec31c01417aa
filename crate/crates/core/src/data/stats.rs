use serde::Serialize;

use super::Adjacency;

/// Descriptive statistics of one graph.
///
/// `clustering` is the global transitivity (closed over connected triplets),
/// not the average of local coefficients. Either statistic is `None` when its
/// denominator vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GraphSummary {
    pub n_actors: usize,
    pub n_edges: usize,
    pub density: f64,
    pub clustering: Option<f64>,
    pub assortativity: Option<f64>,
}

pub fn summary_statistics(adj: &Adjacency) -> GraphSummary {
    let n = adj.n_actors();
    let mut triangles = 0u64;
    let mut triplets = 0u64;
    for v in 0..n {
        let nb = adj.neighbors(v);
        let d = nb.len() as u64;
        triplets += d * d.saturating_sub(1) / 2;
        for (a, &x) in nb.iter().enumerate() {
            for &y in &nb[a + 1..] {
                if adj.has_edge(x, y) {
                    triangles += 1;
                }
            }
        }
    }
    // every triangle was seen once from each corner
    let clustering = (triplets > 0).then(|| triangles as f64 / triplets as f64);

    // Pearson correlation of degrees over both orientations of every edge
    let m = adj.n_edges() as f64;
    let assortativity = if adj.n_edges() == 0 {
        None
    } else {
        let (mut s1, mut s2, mut sxy) = (0.0, 0.0, 0.0);
        for &(a, b) in adj.edges() {
            let (da, db) = (adj.degree(a) as f64, adj.degree(b) as f64);
            s1 += da + db;
            s2 += da * da + db * db;
            sxy += 2.0 * da * db;
        }
        let mean = s1 / (2.0 * m);
        let var = s2 / (2.0 * m) - mean * mean;
        let cov = sxy / (2.0 * m) - mean * mean;
        (var > 1e-12 * mean.max(1.0).powi(2)).then(|| cov / var)
    };

    GraphSummary {
        n_actors: n,
        n_edges: adj.n_edges(),
        density: adj.density(),
        clustering,
        assortativity,
    }
}
