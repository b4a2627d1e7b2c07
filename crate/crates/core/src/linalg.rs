//! Small dense helpers: symbolic cofactor inverses and a real LU solve.

use crate::symexpr::Expr;

pub type SymMatrix = Vec<Vec<Expr>>;

fn minor(m: &SymMatrix, row: usize, col: usize) -> SymMatrix {
    m.iter()
        .enumerate()
        .filter(|(i, _)| *i != row)
        .map(|(_, r)| r.iter().enumerate().filter(|(j, _)| *j != col).map(|(_, e)| e.clone()).collect())
        .collect()
}

/// Laplace expansion along the first row. Intended for the small
/// dimensions of mechanical systems.
pub fn determinant(m: &SymMatrix) -> Expr {
    match m.len() {
        0 => Expr::one(),
        1 => m[0][0].clone(),
        2 => &m[0][0] * &m[1][1] - &m[0][1] * &m[1][0],
        n => Expr::sum((0..n).filter(|j| !m[0][*j].is_zero()).map(|j| {
            let sign = if j % 2 == 0 { Expr::one() } else { Expr::int(-1) };
            sign * &m[0][j] * determinant(&minor(m, 0, j))
        })),
    }
}

/// Adjugate (transposed cofactor matrix), so that `m · adj(m) = det(m) · I`.
pub fn adjugate(m: &SymMatrix) -> SymMatrix {
    let n = m.len();
    if n == 1 {
        return vec![vec![Expr::one()]];
    }
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let c = determinant(&minor(m, j, i));
                    if (i + j) % 2 == 0 {
                        c
                    } else {
                        -c
                    }
                })
                .collect()
        })
        .collect()
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting. Returns
/// the solution and `|det a|`; `None` when a pivot vanishes exactly.
pub fn solve_dense(a: &[Vec<f64>], b: &[f64]) -> Option<(Vec<f64>, f64)> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut x = b.to_vec();
    let mut det = 1.0;
    for k in 0..n {
        let piv = (k..n).max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs()))?;
        if m[piv][k] == 0.0 {
            return None;
        }
        m.swap(k, piv);
        x.swap(k, piv);
        det *= m[k][k];
        for i in k + 1..n {
            let f = m[i][k] / m[k][k];
            for j in k..n {
                m[i][j] -= f * m[k][j];
            }
            x[i] -= f * x[k];
        }
    }
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| m[k][j] * x[j]).sum();
        x[k] = (x[k] - s) / m[k][k];
    }
    Some((x, det.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::parse;

    #[test]
    fn adjugate_inverts() {
        let m: SymMatrix = vec![
            vec![parse("1", 3).unwrap(), parse("q1", 3).unwrap(), parse("0", 3).unwrap()],
            vec![parse("2", 3).unwrap(), parse("1", 3).unwrap(), parse("t", 3).unwrap()],
            vec![parse("q2", 3).unwrap(), parse("0", 3).unwrap(), parse("3", 3).unwrap()],
        ];
        let det = determinant(&m);
        let adj = adjugate(&m);
        let pt = crate::symexpr::Point::new()
            .with(crate::symexpr::Sym::Q(0), 0.3)
            .with(crate::symexpr::Sym::Q(1), -0.7)
            .with(crate::symexpr::Sym::T, 1.1);
        let d = det.evaluate(&pt).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let s = Expr::sum((0..3).map(|k| &m[i][k] * &adj[k][j]));
                let want = if i == j { d } else { 0.0 };
                assert!((s.evaluate(&pt).unwrap() - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dense_solve() {
        let a = vec![vec![0.0, 2.0], vec![1.0, 1.0]];
        let (x, det) = solve_dense(&a, &[2.0, 3.0]).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
        assert!((det - 2.0).abs() < 1e-15);
        assert!(solve_dense(&[vec![1.0, 1.0], vec![1.0, 1.0]], &[1.0, 1.0]).is_none());
    }
}
