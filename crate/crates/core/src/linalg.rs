//! Small dense helpers shared by the spectral and model code.

use nalgebra::DMatrix;

/// `h^m` by repeated squaring; `h^0` is the identity.
pub fn matrix_power(h: &DMatrix<f64>, m: usize) -> DMatrix<f64> {
    let k = h.nrows();
    let mut result = DMatrix::identity(k, k);
    let mut base = h.clone();
    let mut e = m;
    while e > 0 {
        if e & 1 == 1 {
            result = &result * &base;
        }
        e >>= 1;
        if e > 0 {
            base = &base * &base;
        }
    }
    result
}

/// Strongly connected components of the directed graph `i -> j iff m[i,j] > 0`,
/// each sorted, listed in order of their smallest vertex.
pub fn strongly_connected_components(m: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let k = m.nrows();
    let reach = |start: usize, forward: bool| -> Vec<bool> {
        let mut seen = vec![false; k];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(u) = stack.pop() {
            for v in 0..k {
                let edge = if forward { m[(u, v)] } else { m[(v, u)] };
                if edge > 0.0 && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen
    };
    let mut assigned = vec![false; k];
    let mut comps = Vec::new();
    for s in 0..k {
        if assigned[s] {
            continue;
        }
        let fwd = reach(s, true);
        let bwd = reach(s, false);
        let comp: Vec<usize> = (0..k).filter(|&v| fwd[v] && bwd[v]).collect();
        for &v in &comp {
            assigned[v] = true;
        }
        comps.push(comp);
    }
    comps
}

/// Sup-norm of a slice.
pub fn sup_norm(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_matches_repeated_product() {
        let h = DMatrix::from_row_slice(2, 2, &[0.8, 0.2, 0.6, 0.4]);
        let p5 = matrix_power(&h, 5);
        let direct = &h * &h * &h * &h * &h;
        assert!((p5 - direct).abs().max() < 1e-15);
        assert_eq!(matrix_power(&h, 0), DMatrix::identity(2, 2));
    }

    #[test]
    fn scc_splits_blocks() {
        let m = DMatrix::from_row_slice(
            4,
            4,
            &[0.5, 0.5, 0.0, 0.0, 0.5, 0.5, 0.0, 0.0, 0.0, 0.1, 0.4, 0.5, 0.0, 0.0, 0.5, 0.5],
        );
        assert_eq!(strongly_connected_components(&m), vec![vec![0, 1], vec![2, 3]]);
    }
}
