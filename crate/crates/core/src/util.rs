//! Small shared helpers.

/// All k-element subsets of {0, …, n−1} in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        // advance to the next combination
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// SplitMix64 step, used to derive independent sub-seeds from a master
/// seed so that parallel loops cannot change results.
pub fn mix_seed(master: u64, stream: u64) -> u64 {
    let mut z = master.wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(stream.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Relative gap |a−b| / (1+|b|), the comparison used all over the tests.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + b.abs())
}

/// Deterministic grid of genuinely complex points inside a chart:
/// `per_axis` offsets per complex axis along a fixed per-axis direction,
/// shrunk by `margin` (a fraction of the radius). Yields per_axis^n points.
pub fn chart_grid(
    chart: &crate::metric::Chart,
    per_axis: usize,
    margin: f64,
) -> Vec<crate::expr::ComplexPoint> {
    use crate::expr::{ComplexPoint, C64};
    assert!(per_axis >= 1);
    let n = chart.n;
    let mut axis_values: Vec<Vec<C64>> = Vec::with_capacity(n);
    for k in 0..n {
        let phase = 0.35 + 0.6 * k as f64;
        let dir = C64::from_polar(1.0, phase);
        let span = chart.radius[k] * (1.0 - margin).max(0.0);
        let vals = (0..per_axis)
            .map(|j| {
                let t = if per_axis == 1 {
                    0.0
                } else {
                    2.0 * j as f64 / (per_axis - 1) as f64 - 1.0
                };
                chart.center.coords()[k] + dir * (span * t)
            })
            .collect();
        axis_values.push(vals);
    }
    let mut out = Vec::with_capacity(per_axis.pow(n as u32));
    let mut idx = vec![0usize; n];
    loop {
        out.push(ComplexPoint::new(
            (0..n).map(|k| axis_values[k][idx[k]]).collect(),
        ));
        let mut axis = 0;
        loop {
            if axis == n {
                return out;
            }
            idx[axis] += 1;
            if idx[axis] < per_axis {
                break;
            }
            idx[axis] = 0;
            axis += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combinations_counts() {
        assert_eq!(combinations(4, 2).len(), 6);
        assert_eq!(combinations(5, 0), vec![Vec::<usize>::new()]);
        assert_eq!(combinations(3, 3), vec![vec![0, 1, 2]]);
        assert!(combinations(2, 3).is_empty());
        let c = combinations(4, 2);
        assert_eq!(c[0], vec![0, 1]);
        assert_eq!(c[5], vec![2, 3]);
    }

    #[test]
    fn seeds_differ_per_stream() {
        let a = mix_seed(42, 0);
        let b = mix_seed(42, 1);
        assert_ne!(a, b);
        assert_eq!(a, mix_seed(42, 0));
    }
}
