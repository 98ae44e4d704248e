//! Exact one-dimensional clustering by dynamic programming over contiguous
//! segments of the sorted values. Squared distance yields K-means with
//! segment means; absolute distance yields K-medians with segment medians.
//! Both segment costs satisfy the concave Monge condition, so each DP layer
//! is filled with divide-and-conquer over the monotone optimal split.

use crate::config::Distance;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct UnivariateClustering {
    /// Cluster centers, sorted nondecreasing.
    pub centroids: Vec<f64>,
    /// 1-based cluster assignment per input value, aligned with the input order.
    pub labels: Vec<usize>,
    /// Total distance from each value to its assigned centroid.
    pub within_cost: f64,
}

struct SegmentCosts {
    sorted: Vec<f64>,
    prefix: Vec<f64>,
    prefix_sq: Vec<f64>,
    distance: Distance,
}

impl SegmentCosts {
    fn new(sorted: Vec<f64>, distance: Distance) -> Self {
        let mut prefix = Vec::with_capacity(sorted.len() + 1);
        let mut prefix_sq = Vec::with_capacity(sorted.len() + 1);
        prefix.push(0.0);
        prefix_sq.push(0.0);
        let (mut s, mut s2) = (0.0, 0.0);
        for &v in &sorted {
            s += v;
            s2 += v * v;
            prefix.push(s);
            prefix_sq.push(s2);
        }
        Self {
            sorted,
            prefix,
            prefix_sq,
            distance,
        }
    }

    fn sum(&self, i: usize, j: usize) -> f64 {
        self.prefix[j + 1] - self.prefix[i]
    }

    /// Optimal single-cluster cost of the sorted slice `i..=j`.
    fn cost(&self, i: usize, j: usize) -> f64 {
        let len = (j - i + 1) as f64;
        match self.distance {
            Distance::Squared => {
                let s = self.sum(i, j);
                let s2 = self.prefix_sq[j + 1] - self.prefix_sq[i];
                (s2 - s * s / len).max(0.0)
            }
            Distance::Absolute => {
                let med = self.center(i, j);
                let h = i + (j - i) / 2;
                let lo_cnt = (h - i + 1) as f64;
                let hi_cnt = (j - h) as f64;
                let sum_lo = self.sum(i, h);
                let sum_hi = if h == j { 0.0 } else { self.sum(h + 1, j) };
                (sum_hi - hi_cnt * med) + (lo_cnt * med - sum_lo)
            }
        }
    }

    /// Centroid of the sorted slice `i..=j`: mean or (lower/upper-averaged) median.
    fn center(&self, i: usize, j: usize) -> f64 {
        match self.distance {
            Distance::Squared => self.sum(i, j) / (j - i + 1) as f64,
            Distance::Absolute => {
                let len = j - i + 1;
                let h = i + (len - 1) / 2;
                if len % 2 == 1 {
                    self.sorted[h]
                } else {
                    0.5 * (self.sorted[h] + self.sorted[h + 1])
                }
            }
        }
    }
}

/// Fills one DP layer by divide and conquer, exploiting that the optimal
/// split index is nondecreasing in the right endpoint.
fn fill_layer(
    costs: &SegmentCosts,
    prev: &[f64],
    cur: &mut [f64],
    split: &mut [usize],
    layer: usize,
    jlo: usize,
    jhi: usize,
    slo: usize,
    shi: usize,
) {
    if jlo > jhi {
        return;
    }
    let mid = jlo + (jhi - jlo) / 2;
    let lo = slo.max(layer);
    let hi = shi.min(mid);
    let mut best = f64::INFINITY;
    let mut best_s = lo;
    for s in lo..=hi {
        let c = prev[s - 1] + costs.cost(s, mid);
        if c < best {
            best = c;
            best_s = s;
        }
    }
    cur[mid] = best;
    split[mid] = best_s;
    if mid > jlo {
        fill_layer(costs, prev, cur, split, layer, jlo, mid - 1, slo, best_s);
    }
    if mid < jhi {
        fill_layer(costs, prev, cur, split, layer, mid + 1, jhi, best_s, shi);
    }
}

/// Globally optimal clustering of `values` into `k` groups under the chosen
/// distance. Requires `k` to be at most the number of distinct values.
pub fn cluster_1d(values: &[f64], k: usize, distance: Distance) -> Result<UnivariateClustering> {
    let n = values.len();
    if n == 0 {
        return Err(Error::InvalidArgument("cannot cluster an empty vector".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "cannot cluster non-finite values".into(),
        ));
    }
    if k < 1 {
        return Err(Error::InvalidArgument("cluster count must be positive".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        values[a]
            .partial_cmp(&values[b])
            .expect("values are finite")
            .then(a.cmp(&b))
    });
    let sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    let distinct = 1 + sorted.windows(2).filter(|w| w[0] != w[1]).count();
    if k > distinct {
        return Err(Error::InvalidArgument(format!(
            "requested {k} clusters but only {distinct} distinct values"
        )));
    }

    let costs = SegmentCosts::new(sorted, distance);
    let mut prev: Vec<f64> = (0..n).map(|j| costs.cost(0, j)).collect();
    // split[t][j]: start of the last segment in the optimal (t+1)-cluster
    // partition of the first j+1 sorted points.
    let mut splits: Vec<Vec<usize>> = vec![vec![0; n]];
    for layer in 1..k {
        let mut cur = vec![f64::INFINITY; n];
        let mut split = vec![0usize; n];
        fill_layer(&costs, &prev, &mut cur, &mut split, layer, layer, n - 1, layer, n - 1);
        splits.push(split);
        prev = cur;
    }
    let within_cost = prev[n - 1];

    // Recover segment boundaries, then centroids and labels.
    let mut bounds = vec![0usize; k + 1];
    bounds[k] = n;
    let mut j = n - 1;
    for layer in (1..k).rev() {
        let s = splits[layer][j];
        bounds[layer] = s;
        j = s - 1;
    }
    let mut centroids = Vec::with_capacity(k);
    let mut labels = vec![0usize; n];
    for c in 0..k {
        let (lo, hi) = (bounds[c], bounds[c + 1] - 1);
        centroids.push(costs.center(lo, hi));
        for t in lo..=hi {
            labels[order[t]] = c + 1;
        }
    }
    Ok(UnivariateClustering {
        centroids,
        labels,
        within_cost,
    })
}
