//! Exact integer and rational matrix routines.
//!
//! Matrices are row-major `Vec<Vec<i64>>`. Intermediate results are carried in
//! `i128`; overflow checks are enabled in every build profile of the workspace,
//! so an overflow aborts instead of producing a wrong answer.

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, Signed, Zero};

pub type IMat = Vec<Vec<i64>>;
pub type Q = Ratio<i128>;
pub type QMat = Vec<Vec<Q>>;

pub fn identity(n: usize) -> IMat {
    (0..n)
        .map(|i| (0..n).map(|j| i64::from(i == j)).collect())
        .collect()
}

pub fn zeros(rows: usize, cols: usize) -> IMat {
    vec![vec![0; cols]; rows]
}

pub fn transpose(a: &IMat) -> IMat {
    if a.is_empty() {
        return Vec::new();
    }
    let cols = a[0].len();
    (0..cols).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

pub fn mul(a: &IMat, b: &IMat) -> IMat {
    let inner = b.len();
    let cols = if inner == 0 { 0 } else { b[0].len() };
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| {
                    let s: i128 = (0..inner).map(|k| row[k] as i128 * b[k][j] as i128).sum();
                    narrow(s)
                })
                .collect()
        })
        .collect()
}

pub fn mul_vec(a: &IMat, v: &[i64]) -> Vec<i64> {
    a.iter().map(|row| narrow(dot128(row, v))).collect()
}

pub fn dot128(a: &[i64], b: &[i64]) -> i128 {
    a.iter().zip(b).map(|(&x, &y)| x as i128 * y as i128).sum()
}

/// `x^T G y`.
pub fn pair(g: &IMat, x: &[i64], y: &[i64]) -> i128 {
    let mut s = 0i128;
    for (i, row) in g.iter().enumerate() {
        if x[i] == 0 {
            continue;
        }
        s += x[i] as i128 * dot128(row, y);
    }
    s
}

/// `B G B^T` for a basis given by rows.
pub fn restrict_gram(g: &IMat, rows: &IMat) -> IMat {
    rows.iter()
        .map(|x| rows.iter().map(|y| narrow(pair(g, x, y))).collect())
        .collect()
}

pub fn narrow(x: i128) -> i64 {
    i64::try_from(x).expect("integer overflow in exact lattice arithmetic")
}

pub fn is_symmetric(a: &IMat) -> bool {
    let n = a.len();
    a.iter().all(|r| r.len() == n) && (0..n).all(|i| (0..i).all(|j| a[i][j] == a[j][i]))
}

/// Determinant by fraction-free (Bareiss) elimination.
pub fn det(a: &IMat) -> i128 {
    let n = a.len();
    if n == 0 {
        return 1;
    }
    let mut m: Vec<Vec<i128>> = a.iter().map(|r| r.iter().map(|&x| x as i128).collect()).collect();
    let mut sign = 1i128;
    let mut prev = 1i128;
    for k in 0..n {
        if m[k][k] == 0 {
            let Some(p) = (k + 1..n).find(|&i| m[i][k] != 0) else {
                return 0;
            };
            m.swap(k, p);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) / prev;
            }
        }
        prev = m[k][k];
    }
    sign * m[n - 1][n - 1]
}

pub fn to_q(a: &IMat) -> QMat {
    a.iter()
        .map(|r| r.iter().map(|&x| Q::from_integer(x as i128)).collect())
        .collect()
}

/// Exact inverse over Q, `None` if singular.
pub fn inverse_q(a: &IMat) -> Option<QMat> {
    let n = a.len();
    let mut m = to_q(a);
    let mut inv: QMat = (0..n)
        .map(|i| (0..n).map(|j| if i == j { Q::one() } else { Q::zero() }).collect())
        .collect();
    for c in 0..n {
        let p = (c..n).find(|&r| !m[r][c].is_zero())?;
        m.swap(c, p);
        inv.swap(c, p);
        let piv = m[c][c];
        for j in 0..n {
            m[c][j] /= piv;
            inv[c][j] /= piv;
        }
        for r in 0..n {
            if r != c && !m[r][c].is_zero() {
                let f = m[r][c];
                for j in 0..n {
                    let (mc, ic) = (m[c][j], inv[c][j]);
                    m[r][j] -= f * mc;
                    inv[r][j] -= f * ic;
                }
            }
        }
    }
    Some(inv)
}

/// Common denominator form of an exact inverse: `(adj, d)` with `a^{-1} = adj / d`, `d > 0`.
pub fn inverse_scaled(a: &IMat) -> Option<(IMat, i64)> {
    let inv = inverse_q(a)?;
    let d = inv
        .iter()
        .flatten()
        .fold(1i128, |acc, x| acc.lcm(x.denom()));
    let adj = inv
        .iter()
        .map(|r| r.iter().map(|x| narrow(x.numer() * (d / x.denom()))).collect())
        .collect();
    Some((adj, narrow(d)))
}

/// Smith normal form `U A V = D`, with `U`, `V` unimodular and the nonzero
/// diagonal entries positive and successively dividing.
#[derive(Clone, Debug)]
pub struct Smith {
    pub u: IMat,
    pub v: IMat,
    pub v_inv: IMat,
    pub diag: Vec<i64>,
}

impl Smith {
    pub fn rank(&self) -> usize {
        self.diag.iter().filter(|&&d| d != 0).count()
    }
}

pub fn smith(a: &IMat) -> Smith {
    let m = a.len();
    let n = if m == 0 { 0 } else { a[0].len() };
    let mut x: Vec<Vec<i128>> = a.iter().map(|r| r.iter().map(|&e| e as i128).collect()).collect();
    let id = |k: usize| -> Vec<Vec<i128>> {
        (0..k).map(|i| (0..k).map(|j| i128::from(i == j)).collect()).collect()
    };
    let mut u = id(m);
    let mut v = id(n);
    let mut vi = id(n);

    for t in 0..m.min(n) {
        loop {
            let mut best: Option<(usize, usize)> = None;
            for i in t..m {
                for j in t..n {
                    if x[i][j] != 0
                        && best.is_none_or(|(bi, bj)| x[i][j].abs() < x[bi][bj].abs())
                    {
                        best = Some((i, j));
                    }
                }
            }
            let Some((pi, pj)) = best else { break };
            x.swap(t, pi);
            u.swap(t, pi);
            if pj != t {
                for row in x.iter_mut() {
                    row.swap(t, pj);
                }
                for row in v.iter_mut() {
                    row.swap(t, pj);
                }
                vi.swap(t, pj);
            }
            let p = x[t][t];
            let mut clean = true;
            for i in t + 1..m {
                let q = Integer::div_floor(&x[i][t], &p);
                if q != 0 {
                    for j in 0..n {
                        x[i][j] -= q * x[t][j];
                    }
                    for j in 0..m {
                        u[i][j] -= q * u[t][j];
                    }
                }
                clean &= x[i][t] == 0;
            }
            for j in t + 1..n {
                let q = Integer::div_floor(&x[t][j], &p);
                if q != 0 {
                    for row in x.iter_mut() {
                        row[j] -= q * row[t];
                    }
                    for row in v.iter_mut() {
                        row[j] -= q * row[t];
                    }
                    for k in 0..n {
                        vi[t][k] += q * vi[j][k];
                    }
                }
                clean &= x[t][j] == 0;
            }
            if !clean {
                continue;
            }
            let bad = (t + 1..m).find(|&i| (t + 1..n).any(|j| x[i][j] % p != 0));
            match bad {
                Some(i) => {
                    for j in 0..n {
                        x[t][j] += x[i][j];
                    }
                    for j in 0..m {
                        u[t][j] += u[i][j];
                    }
                }
                None => break,
            }
        }
        if x[t][t] < 0 {
            for e in x[t].iter_mut() {
                *e = -*e;
            }
            for e in u[t].iter_mut() {
                *e = -*e;
            }
        }
    }
    let conv = |a: Vec<Vec<i128>>| -> IMat {
        a.into_iter().map(|r| r.into_iter().map(narrow).collect()).collect()
    };
    Smith {
        diag: (0..m.min(n)).map(|i| narrow(x[i][i])).collect(),
        u: conv(u),
        v: conv(v),
        v_inv: conv(vi),
    }
}

/// Basis (as rows) of the integer kernel `{x in Z^n : A x = 0}`. The result is
/// automatically saturated.
pub fn kernel(a: &IMat, n: usize) -> IMat {
    if a.is_empty() {
        return identity(n);
    }
    let s = smith(a);
    let r = s.rank();
    (r..n).map(|j| s.v.iter().map(|row| row[j]).collect()).collect()
}

/// Row Hermite normal form of the span of the given rows; zero rows dropped.
pub fn hnf_rows(rows: &IMat) -> IMat {
    if rows.is_empty() {
        return Vec::new();
    }
    let n = rows[0].len();
    let mut a: Vec<Vec<i128>> = rows
        .iter()
        .map(|r| r.iter().map(|&e| e as i128).collect())
        .collect();
    let mut piv_row = 0usize;
    let mut pivots = Vec::new();
    for c in 0..n {
        if piv_row == a.len() {
            break;
        }
        loop {
            let mut best: Option<usize> = None;
            for i in piv_row..a.len() {
                if a[i][c] != 0 && best.is_none_or(|b| a[i][c].abs() < a[b][c].abs()) {
                    best = Some(i);
                }
            }
            let Some(b) = best else { break };
            a.swap(piv_row, b);
            let p = a[piv_row][c];
            let mut done = true;
            for i in piv_row + 1..a.len() {
                let q = Integer::div_floor(&a[i][c], &p);
                if q != 0 {
                    for j in 0..n {
                        a[i][j] -= q * a[piv_row][j];
                    }
                }
                done &= a[i][c] == 0;
            }
            if done {
                break;
            }
        }
        if a[piv_row][c] != 0 {
            if a[piv_row][c] < 0 {
                for e in a[piv_row].iter_mut() {
                    *e = -*e;
                }
            }
            pivots.push((piv_row, c));
            piv_row += 1;
        }
    }
    a.truncate(piv_row);
    for &(r, c) in &pivots {
        let p = a[r][c];
        for i in 0..r {
            let q = Integer::div_floor(&a[i][c], &p);
            if q != 0 {
                for j in 0..n {
                    a[i][j] -= q * a[r][j];
                }
            }
        }
    }
    a.into_iter().map(|r| r.into_iter().map(narrow).collect()).collect()
}

/// Rank over Q.
pub fn rank(rows: &IMat) -> usize {
    hnf_rows(rows).len()
}

/// Solve `c B = v` over Q for rows `B`; `None` if `v` is not in the Q-span.
pub fn solve_rows_q(basis: &IMat, v: &[i64]) -> Option<Vec<Q>> {
    let k = basis.len();
    let n = v.len();
    // Augmented system B^T c = v.
    let mut m: QMat = (0..n)
        .map(|j| {
            let mut row: Vec<Q> = (0..k).map(|i| Q::from_integer(basis[i][j] as i128)).collect();
            row.push(Q::from_integer(v[j] as i128));
            row
        })
        .collect();
    let mut r = 0;
    let mut where_col = vec![usize::MAX; k];
    for c in 0..k {
        let Some(p) = (r..n).find(|&i| !m[i][c].is_zero()) else { continue };
        m.swap(r, p);
        let piv = m[r][c];
        for e in m[r].iter_mut() {
            *e /= piv;
        }
        for i in 0..n {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c];
                for j in 0..=k {
                    let t = m[r][j];
                    m[i][j] -= f * t;
                }
            }
        }
        where_col[c] = r;
        r += 1;
    }
    if (r..n).any(|i| !m[i][k].is_zero()) {
        return None;
    }
    Some(
        (0..k)
            .map(|c| if where_col[c] == usize::MAX { Q::zero() } else { m[where_col[c]][k] })
            .collect(),
    )
}

/// Integer solution of `c B = v`, if one exists (B with independent rows).
pub fn solve_rows_int(basis: &IMat, v: &[i64]) -> Option<Vec<i64>> {
    let c = solve_rows_q(basis, v)?;
    c.iter()
        .map(|x| x.is_integer().then(|| narrow(x.to_integer())))
        .collect()
}

/// Rational matrix times integer matrix, checked to be integral.
pub fn q_to_int(a: &QMat) -> Option<IMat> {
    a.iter()
        .map(|r| r.iter().map(|x| x.is_integer().then(|| narrow(x.to_integer()))).collect())
        .collect()
}

pub fn q_mul(a: &QMat, b: &QMat) -> QMat {
    let inner = b.len();
    let cols = if inner == 0 { 0 } else { b[0].len() };
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| (0..inner).fold(Q::zero(), |acc, k| acc + row[k] * b[k][j]))
                .collect()
        })
        .collect()
}

pub fn gcd_all(xs: impl IntoIterator<Item = i128>) -> i128 {
    xs.into_iter().fold(0i128, |g, x| g.gcd(&x))
}

pub fn mat_pow_is_identity(g: &IMat, e: u64) -> bool {
    pow(g, e) == identity(g.len())
}

pub fn pow(g: &IMat, mut e: u64) -> IMat {
    let mut base = g.clone();
    let mut acc = identity(g.len());
    while e > 0 {
        if e & 1 == 1 {
            acc = mul(&acc, &base);
        }
        base = mul(&base, &base);
        e >>= 1;
    }
    acc
}

pub fn is_unit_abs(x: &Q) -> bool {
    x.abs().is_one()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn det_small() {
        assert_eq!(det(&vec![vec![0, 1], vec![1, 0]]), -1);
        assert_eq!(det(&vec![vec![2, 1], vec![1, 2]]), 3);
        assert_eq!(det(&vec![vec![0, 0], vec![0, 1]]), 0);
    }

    #[test]
    fn smith_reconstructs() {
        let a = vec![vec![2, 4, 4], vec![-6, 6, 12], vec![10, -4, -16]];
        let s = smith(&a);
        let d = mul(&mul(&s.u, &a), &s.v);
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert_eq!(d[i][j], 0);
                }
            }
        }
        assert_eq!(s.diag, vec![2, 6, 12]);
        assert_eq!(mul(&s.v, &s.v_inv), identity(3));
    }

    #[test]
    fn kernel_of_row() {
        let k = kernel(&vec![vec![1, 1, 0]], 3);
        assert_eq!(k.len(), 2);
        for r in &k {
            assert_eq!(r[0] + r[1], 0);
        }
    }

    #[test]
    fn hnf_of_dependent_rows() {
        let h = hnf_rows(&vec![vec![2, 0], vec![0, 2], vec![1, 1]]);
        assert_eq!(h, vec![vec![1, 1], vec![0, 2]]);
    }

    #[test]
    fn inverse_scaled_of_a2() {
        let (adj, d) = inverse_scaled(&vec![vec![-2, 1], vec![1, -2]]).unwrap();
        assert_eq!(d, 3);
        assert_eq!(adj, vec![vec![-2, -1], vec![-1, -2]]);
    }
}
