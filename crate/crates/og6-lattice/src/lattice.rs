//! Even nondegenerate lattices given by a Gram matrix over a fixed basis.

use num_rational::Ratio;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{LatticeError, Result};
use crate::fqf::Fqf;
use crate::linalg::{self, IMat, Q};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Lattice {
    gram: IMat,
}

impl Lattice {
    /// Validated constructor: square, symmetric, even diagonal, nondegenerate.
    pub fn new(gram: IMat) -> Result<Self> {
        let n = gram.len();
        if n == 0 {
            return Err(LatticeError::Empty);
        }
        if gram.iter().any(|r| r.len() != n) {
            return Err(LatticeError::NotSquare);
        }
        for i in 0..n {
            for j in 0..i {
                if gram[i][j] != gram[j][i] {
                    return Err(LatticeError::NotSymmetric(i, j));
                }
            }
        }
        if let Some(i) = (0..n).find(|&i| gram[i][i] % 2 != 0) {
            return Err(LatticeError::OddDiagonal { index: i, value: gram[i][i] });
        }
        if linalg::det(&gram) == 0 {
            return Err(LatticeError::Degenerate);
        }
        Ok(Lattice { gram })
    }

    /// The zero lattice (rank 0); used as the coinvariant of the identity.
    pub fn zero() -> Self {
        Lattice { gram: Vec::new() }
    }

    pub fn gram(&self) -> &IMat {
        &self.gram
    }

    pub fn rank(&self) -> usize {
        self.gram.len()
    }

    pub fn det(&self) -> i64 {
        linalg::narrow(linalg::det(&self.gram))
    }

    pub fn abs_det(&self) -> i64 {
        self.det().abs()
    }

    pub fn norm(&self, v: &[i64]) -> i64 {
        linalg::narrow(linalg::pair(&self.gram, v, v))
    }

    pub fn pair(&self, x: &[i64], y: &[i64]) -> i64 {
        linalg::narrow(linalg::pair(&self.gram, x, y))
    }

    /// `(s_plus, s_minus)` by symmetric congruence diagonalization over Q.
    pub fn signature(&self) -> (usize, usize) {
        let d = diagonalize(&self.gram);
        let pos = d.iter().filter(|x| x.is_positive()).count();
        (pos, d.len() - pos)
    }

    pub fn is_negative_definite(&self) -> bool {
        self.signature().0 == 0
    }

    pub fn is_positive_definite(&self) -> bool {
        self.signature().1 == 0
    }

    pub fn is_definite(&self) -> bool {
        let (p, m) = self.signature();
        p == 0 || m == 0
    }

    pub fn rescale(&self, n: i64) -> Result<Lattice> {
        if n == 0 {
            return Err(LatticeError::OutOfRange("rescale by 0".into()));
        }
        Ok(Lattice {
            gram: self.gram.iter().map(|r| r.iter().map(|&x| x * n).collect()).collect(),
        })
    }

    pub fn negate(&self) -> Lattice {
        self.rescale(-1).expect("nonzero scale")
    }

    pub fn direct_sum(parts: &[Lattice]) -> Result<Lattice> {
        if parts.is_empty() {
            return Err(LatticeError::Empty);
        }
        Ok(Self::sum_unchecked(parts))
    }

    /// Direct sum allowing zero summands (and an empty list, giving 0).
    pub fn sum_unchecked(parts: &[Lattice]) -> Lattice {
        let n: usize = parts.iter().map(|p| p.rank()).sum();
        let mut g = linalg::zeros(n, n);
        let mut off = 0;
        for p in parts {
            for i in 0..p.rank() {
                for j in 0..p.rank() {
                    g[off + i][off + j] = p.gram[i][j];
                }
            }
            off += p.rank();
        }
        Lattice { gram: g }
    }

    pub fn oplus(&self, other: &Lattice) -> Lattice {
        Self::sum_unchecked(&[self.clone(), other.clone()])
    }

    pub fn check_vector(&self, v: &[i64]) -> Result<()> {
        if v.len() != self.rank() {
            return Err(LatticeError::WrongLength { got: v.len(), rank: self.rank() });
        }
        Ok(())
    }

    /// Pairings of `v` with the basis, i.e. `G v`.
    pub fn pairing_vector(&self, v: &[i64]) -> Vec<i64> {
        linalg::mul_vec(&self.gram, v)
    }

    /// `gcd{ v.w : w in L }`.
    pub fn divisibility(&self, v: &[i64]) -> Result<i64> {
        self.check_vector(v)?;
        if v.iter().all(|&x| x == 0) {
            return Err(LatticeError::ZeroVector);
        }
        let g = linalg::gcd_all(self.pairing_vector(v).into_iter().map(i128::from));
        Ok(linalg::narrow(g))
    }

    pub fn discriminant(&self) -> Discriminant {
        Discriminant::of(self)
    }

    pub fn disc_form(&self) -> Fqf {
        self.discriminant().form
    }

    /// All nonzero vectors whose square lies in `norms`, sorted lexicographically.
    pub fn short_vectors(&self, norms: &[i64]) -> Result<Vec<Vec<i64>>> {
        if !self.is_negative_definite() {
            return Err(LatticeError::NotNegativeDefinite);
        }
        Ok(self.vectors_up_to(norms.iter().map(|x| -x).max().unwrap_or(0), |n| {
            norms.contains(&-n)
        }))
    }

    /// For a definite lattice, all nonzero vectors `v` with `|v^2| <= bound` for
    /// which `keep(|v^2|)` holds.
    pub fn vectors_up_to(&self, bound: i64, keep: impl Fn(i64) -> bool) -> Vec<Vec<i64>> {
        let pos: IMat = if self.is_positive_definite() {
            self.gram.clone()
        } else {
            self.negate().gram
        };
        let mut out = fincke_pohst(&pos, bound)
            .into_iter()
            .filter(|v| keep(linalg::narrow(linalg::pair(&pos, v, v))))
            .collect::<Vec<_>>();
        out.sort();
        out
    }

    /// Count of vectors by absolute norm `2, 4, ..., 2t` (definite lattices).
    pub fn theta_prefix(&self, t: i64) -> Vec<usize> {
        let pos: IMat = if self.is_positive_definite() {
            self.gram.clone()
        } else {
            self.negate().gram
        };
        let mut counts = vec![0usize; t as usize];
        for v in fincke_pohst(&pos, 2 * t) {
            let n = linalg::pair(&pos, &v, &v) as i64;
            if n % 2 == 0 && n > 0 {
                counts[(n / 2 - 1) as usize] += 1;
            }
        }
        counts
    }

    /// Primitive closure of the span of `s` (rows), in Hermite form.
    pub fn saturation(&self, s: &IMat) -> Result<IMat> {
        check_independent(s, self.rank())?;
        Ok(saturate(s, self.rank()))
    }

    pub fn is_primitive(&self, s: &IMat) -> Result<bool> {
        check_independent(s, self.rank())?;
        Ok(is_primitive_rows(s))
    }

    /// Orthogonal complement of a primitive nondegenerate sublattice. Returns the
    /// complement and its basis (rows) in ambient coordinates.
    pub fn orthogonal_complement(&self, s: &IMat) -> Result<(Lattice, IMat)> {
        check_independent(s, self.rank())?;
        if !is_primitive_rows(s) {
            return Err(LatticeError::NotPrimitive);
        }
        if !s.is_empty() && linalg::det(&linalg::restrict_gram(&self.gram, s)) == 0 {
            return Err(LatticeError::DegenerateSublattice);
        }
        let basis = self.complement_basis(s);
        let g = linalg::restrict_gram(&self.gram, &basis);
        if !basis.is_empty() && linalg::det(&g) == 0 {
            return Err(LatticeError::DegenerateSublattice);
        }
        Ok((Lattice { gram: g }, basis))
    }

    /// Basis of `{x : x.s = 0 for s in S}` in Hermite form (no checks).
    pub fn complement_basis(&self, s: &IMat) -> IMat {
        if s.is_empty() {
            return linalg::identity(self.rank());
        }
        let sg = linalg::mul(s, &self.gram);
        linalg::hnf_rows(&linalg::kernel(&sg, self.rank()))
    }

    /// Sublattice spanned by the given rows, as a lattice in its own right.
    pub fn sublattice(&self, rows: &IMat) -> Result<Lattice> {
        Lattice::new(linalg::restrict_gram(&self.gram, rows))
    }

    pub fn is_even(&self) -> bool {
        (0..self.rank()).all(|i| self.gram[i][i] % 2 == 0)
    }
}

fn check_independent(s: &IMat, n: usize) -> Result<()> {
    if s.iter().any(|r| r.len() != n) {
        return Err(LatticeError::WrongLength { got: s.first().map_or(0, |r| r.len()), rank: n });
    }
    if linalg::rank(s) != s.len() {
        return Err(LatticeError::Dependent);
    }
    Ok(())
}

pub fn saturate(s: &IMat, n: usize) -> IMat {
    if s.is_empty() {
        return Vec::new();
    }
    let k = linalg::kernel(s, n);
    if k.is_empty() {
        return linalg::identity(n);
    }
    linalg::hnf_rows(&linalg::kernel(&k, n))
}

pub fn is_primitive_rows(s: &IMat) -> bool {
    if s.is_empty() {
        return true;
    }
    let sm = linalg::smith(s);
    sm.rank() == s.len() && sm.diag.iter().all(|&d| d == 1)
}

/// Symmetric congruence diagonalization over Q; returns the diagonal.
pub fn diagonalize(g: &IMat) -> Vec<Q> {
    let n = g.len();
    let mut a = linalg::to_q(g);
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        if a[k][k].is_zero() {
            if let Some(j) = (k + 1..n).find(|&j| !a[j][j].is_zero()) {
                a.swap(k, j);
                for row in a.iter_mut() {
                    row.swap(k, j);
                }
            } else if let Some(j) = (k + 1..n).find(|&j| !a[k][j].is_zero()) {
                // e_k <- e_k + e_j makes the pivot 2 a_kj.
                for c in 0..n {
                    let t = a[j][c];
                    a[k][c] += t;
                }
                for r in 0..n {
                    let t = a[r][j];
                    a[r][k] += t;
                }
            }
        }
        let p = a[k][k];
        if p.is_zero() {
            out.push(p);
            continue;
        }
        for i in k + 1..n {
            let f = a[i][k] / p;
            if f.is_zero() {
                continue;
            }
            for c in k..n {
                let t = a[k][c];
                a[i][c] -= f * t;
            }
            for r in k..n {
                let t = a[r][k];
                a[r][i] -= f * t;
            }
        }
        out.push(p);
    }
    out
}

/// Lattice points `x != 0` with `x^T A x <= bound` for positive definite `A`.
pub fn fincke_pohst(a: &IMat, bound: i64) -> Vec<Vec<i64>> {
    let n = a.len();
    if n == 0 || bound <= 0 {
        return Vec::new();
    }
    let mut q = linalg::to_q(a);
    for i in 0..n {
        for j in i + 1..n {
            q[j][i] = q[i][j];
            q[i][j] = q[i][j] / q[i][i];
        }
        for k in i + 1..n {
            for l in k..n {
                let t = q[k][i] * q[i][l];
                q[k][l] -= t;
            }
        }
    }
    let mut out = Vec::new();
    let mut x = vec![0i64; n];
    let c = Q::from_integer(bound as i128);
    fp_rec(&q, n - 1, c, &mut x, &mut out);
    out.retain(|v| v.iter().any(|&e| e != 0));
    out
}

fn fp_rec(q: &[Vec<Q>], i: usize, rem: Q, x: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
    let n = q.len();
    let mut center = Q::zero();
    for j in i + 1..n {
        center -= q[i][j] * Ratio::from_integer(x[j] as i128);
    }
    let fits = |v: i64| -> Option<Q> {
        let d = Q::from_integer(v as i128) - center;
        let used = q[i][i] * d * d;
        (used <= rem).then(|| rem - used)
    };
    let start = center.round().to_integer() as i64;
    let visit = |v: i64, x: &mut Vec<i64>, out: &mut Vec<Vec<i64>>| -> bool {
        match fits(v) {
            Some(r) => {
                x[i] = v;
                if i == 0 {
                    out.push(x.clone());
                } else {
                    fp_rec(q, i - 1, r, x, out);
                }
                true
            }
            None => false,
        }
    };
    if !visit(start, x, out) {
        // Convexity: if the nearest integer fails, nothing fits.
        x[i] = 0;
        return;
    }
    let mut v = start + 1;
    while visit(v, x, out) {
        v += 1;
    }
    let mut v = start - 1;
    while visit(v, x, out) {
        v -= 1;
    }
    x[i] = 0;
}

/// Discriminant group data: the finite quadratic form together with the maps
/// needed to send dual vectors to group elements and back.
#[derive(Clone, Debug)]
pub struct Discriminant {
    pub form: Fqf,
    /// Rows of `U` (from `U G V = D`) for the nontrivial elementary divisors.
    class_rows: IMat,
    /// Lattice vectors `d_i w_i` where `w_i` are the generators in `L^vee`.
    gen_numerators: IMat,
    gram: IMat,
}

impl Discriminant {
    pub fn of(l: &Lattice) -> Discriminant {
        let n = l.rank();
        if n == 0 {
            return Discriminant {
                form: Fqf::trivial(),
                class_rows: Vec::new(),
                gen_numerators: Vec::new(),
                gram: Vec::new(),
            };
        }
        let s = linalg::smith(&l.gram);
        let idx: Vec<usize> = (0..n).filter(|&i| s.diag[i] > 1).collect();
        let orders: Vec<i64> = idx.iter().map(|&i| s.diag[i]).collect();
        let cols: IMat = idx.iter().map(|&i| s.v.iter().map(|r| r[i]).collect()).collect();
        let e = orders.iter().fold(1i64, |acc, &d| num_integer::lcm(acc, d));
        let k = idx.len();
        let mut num = linalg::zeros(k, k);
        for a in 0..k {
            for b in 0..k {
                let p = linalg::pair(&l.gram, &cols[a], &cols[b]);
                // p / (d_a d_b) expressed over e.
                let den = orders[a] as i128 * orders[b] as i128;
                let scaled = p * e as i128;
                debug_assert_eq!(scaled % den, 0);
                num[a][b] = linalg::narrow(scaled / den);
            }
        }
        let form = Fqf::from_numerators(orders, e, num).expect("discriminant form is well defined");
        Discriminant {
            form,
            class_rows: idx.iter().map(|&i| s.u[i].clone()).collect(),
            gen_numerators: cols,
            gram: l.gram.clone(),
        }
    }

    /// Class of the dual vector whose pairings with the basis are `p`.
    pub fn class_of_pairing(&self, p: &[i64]) -> Vec<i64> {
        let c: Vec<i64> = self
            .class_rows
            .iter()
            .map(|r| linalg::narrow(linalg::dot128(r, p)))
            .collect();
        self.form.reduce(&c)
    }

    /// Class of `v / d` if it lies in the dual lattice.
    pub fn class_of_fraction(&self, v: &[i64], d: i64) -> Option<Vec<i64>> {
        let p = linalg::mul_vec(&self.gram, v);
        if p.iter().any(|x| x % d != 0) {
            return None;
        }
        let p: Vec<i64> = p.iter().map(|x| x / d).collect();
        Some(self.class_of_pairing(&p))
    }

    /// A representative of `x` in `L^vee` as `(numerator, denominator)` in lattice coordinates.
    pub fn lift(&self, x: &[i64]) -> (Vec<i64>, i64) {
        let e = self.form.exponent();
        let n = self.gram.len();
        let mut num = vec![0i128; n];
        for (i, &c) in x.iter().enumerate() {
            let f = c as i128 * (e / self.form.orders()[i]) as i128;
            for j in 0..n {
                num[j] += f * self.gen_numerators[i][j] as i128;
            }
        }
        (num.into_iter().map(linalg::narrow).collect(), e)
    }
}

// Standard lattices, root lattices negative definite.

pub fn u() -> Lattice {
    Lattice { gram: vec![vec![0, 1], vec![1, 0]] }
}

pub fn rank1(m: i64) -> Result<Lattice> {
    if m == 0 || m % 2 != 0 {
        return Err(LatticeError::OutOfRange(format!("[{m}] must be even and nonzero")));
    }
    Ok(Lattice { gram: vec![vec![m]] })
}

pub fn a(n: usize) -> Result<Lattice> {
    if n < 1 {
        return Err(LatticeError::OutOfRange("A_n needs n >= 1".into()));
    }
    let mut g = linalg::zeros(n, n);
    for i in 0..n {
        g[i][i] = -2;
        if i + 1 < n {
            g[i][i + 1] = 1;
            g[i + 1][i] = 1;
        }
    }
    Ok(Lattice { gram: g })
}

pub fn d(n: usize) -> Result<Lattice> {
    if n < 4 {
        return Err(LatticeError::OutOfRange("D_n needs n >= 4".into()));
    }
    // Chain 0-1-...-(n-2) with node n-1 attached to n-3.
    let mut g = linalg::zeros(n, n);
    for i in 0..n {
        g[i][i] = -2;
    }
    for i in 0..n - 2 {
        g[i][i + 1] = 1;
        g[i + 1][i] = 1;
    }
    g[n - 3][n - 1] = 1;
    g[n - 1][n - 3] = 1;
    Ok(Lattice { gram: g })
}

pub fn e(n: usize) -> Result<Lattice> {
    if !(6..=8).contains(&n) {
        return Err(LatticeError::OutOfRange("E_n needs n in {6,7,8}".into()));
    }
    // Chain 0-1-...-(n-2) with node n-1 attached to node 2.
    let mut g = linalg::zeros(n, n);
    for i in 0..n {
        g[i][i] = -2;
    }
    for i in 0..n - 2 {
        g[i][i + 1] = 1;
        g[i + 1][i] = 1;
    }
    g[2][n - 1] = 1;
    g[n - 1][2] = 1;
    Ok(Lattice { gram: g })
}

/// The rank 4 lattice that shows up among the order 6 candidates.
pub fn bt_a() -> Lattice {
    Lattice {
        gram: vec![
            vec![-2, 1, -1, -1],
            vec![1, -2, 1, 1],
            vec![-1, 1, -2, 0],
            vec![-1, 1, 0, -4],
        ],
    }
}

/// `3U + 2[-2]` in the basis `e1, f1, e2, f2, e3, f3, g1, g2`.
pub fn bl() -> Lattice {
    let m2 = rank1(-2).unwrap();
    Lattice::sum_unchecked(&[u(), u(), u(), m2.clone(), m2])
}

/// `5U`.
pub fn blambda() -> Lattice {
    Lattice::sum_unchecked(&[u(), u(), u(), u(), u()])
}

/// `2[2]`.
pub fn br() -> Lattice {
    let p2 = rank1(2).unwrap();
    Lattice::sum_unchecked(&[p2.clone(), p2])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constructor_diagnostics() {
        assert_eq!(Lattice::new(vec![vec![1]]), Err(LatticeError::OddDiagonal { index: 0, value: 1 }));
        assert_eq!(Lattice::new(vec![vec![0, 1], vec![2, 0]]), Err(LatticeError::NotSymmetric(1, 0)));
        assert_eq!(Lattice::new(vec![vec![2, 2], vec![2, 2]]), Err(LatticeError::Degenerate));
        assert_eq!(Lattice::new(vec![vec![0, 1]]), Err(LatticeError::NotSquare));
        let l = Lattice::new(vec![vec![-2]]).unwrap();
        assert_eq!((l.rank(), l.det()), (1, -2));
    }

    #[test]
    fn standard_invariants() {
        assert_eq!(bl().det(), -4);
        assert_eq!(bl().signature(), (3, 5));
        assert_eq!(blambda().det(), -1);
        assert_eq!(blambda().signature(), (5, 5));
        assert_eq!(a(2).unwrap().det(), 3);
        assert_eq!(a(2).unwrap().signature(), (0, 2));
        assert_eq!(d(4).unwrap().det(), 4);
        assert_eq!(d(5).unwrap().det(), -4);
        assert_eq!(e(8).unwrap().det(), 1);
        assert_eq!(e(6).unwrap().det(), 3);
        assert_eq!(e(7).unwrap().det(), -2);
        assert_eq!(bt_a().det(), 12);
        assert!(a(0).is_err() && d(3).is_err() && e(5).is_err() && rank1(3).is_err());
    }

    #[test]
    fn rescale_and_sums() {
        assert_eq!(rank1(2).unwrap().rescale(-1).unwrap(), rank1(-2).unwrap());
        assert_eq!(a(2).unwrap().rescale(2).unwrap().det(), 12);
        assert_eq!(u().rescale(2).unwrap().det(), -4);
        assert!(u().rescale(0).is_err());
        let s = Lattice::direct_sum(&[rank1(-2).unwrap(), rank1(-4).unwrap()]).unwrap();
        assert_eq!((s.rank(), s.det()), (2, 8));
        assert!(Lattice::direct_sum(&[]).is_err());
    }

    #[test]
    fn short_vector_counts() {
        let d4 = d(4).unwrap();
        assert_eq!(d4.short_vectors(&[-2]).unwrap().len(), 24);
        assert_eq!(a(2).unwrap().short_vectors(&[-4]).unwrap().len(), 0);
        assert_eq!(rank1(-2).unwrap().short_vectors(&[-2]).unwrap(), vec![vec![-1], vec![1]]);
        assert_eq!(e(8).unwrap().short_vectors(&[-2]).unwrap().len(), 240);
        assert!(u().short_vectors(&[-2]).is_err());
    }

    #[test]
    fn divisibility_examples() {
        assert_eq!(rank1(-2).unwrap().divisibility(&[1]).unwrap(), 2);
        assert_eq!(u().divisibility(&[1, 0]).unwrap(), 1);
        assert!(u().divisibility(&[0, 0]).is_err());
    }

    #[test]
    fn saturation_and_complements() {
        let h = u();
        assert_eq!(h.saturation(&vec![vec![2, 0]]).unwrap(), vec![vec![1, 0]]);
        assert!(h.is_primitive(&vec![vec![1, 1]]).unwrap());
        assert!(!h.is_primitive(&vec![vec![2, 0]]).unwrap());
        let (c, basis) = h.orthogonal_complement(&vec![vec![1, 1]]).unwrap();
        assert_eq!(c.gram(), &vec![vec![-2]]);
        assert_eq!(basis.len(), 1);
        assert_eq!(basis[0][0], -basis[0][1]);
        assert_eq!(
            h.orthogonal_complement(&vec![vec![1, 0]]),
            Err(LatticeError::DegenerateSublattice)
        );
        assert_eq!(h.saturation(&vec![vec![1, 1], vec![2, 2]]), Err(LatticeError::Dependent));
    }

    #[test]
    fn discriminant_of_a2_and_bl() {
        let q = a(2).unwrap().disc_form();
        assert_eq!(q.orders(), &[3]);
        assert_eq!(q.eval_q(&[1]), Ratio::new(4, 3));
        let q = bl().disc_form();
        assert_eq!(q.orders(), &[2, 2]);
        assert_eq!(q.eval_q(&[1, 0]), Ratio::new(3, 2));
        assert_eq!(q.eval_q(&[0, 1]), Ratio::new(3, 2));
        assert_eq!(q.eval_q(&[1, 1]), Ratio::new(1, 1));
        assert_eq!(u().disc_form().order(), 1);
    }

    #[test]
    fn classes_of_fractions() {
        let l = rank1(-2).unwrap();
        let disc = l.discriminant();
        assert_eq!(disc.class_of_fraction(&[1], 2), Some(vec![1]));
        assert_eq!(disc.class_of_fraction(&[2], 2), Some(vec![0]));
        let (num, den) = disc.lift(&[1]);
        assert_eq!(den, 2);
        assert_eq!(num[0].abs(), 1);
        assert_eq!(disc.class_of_fraction(&num, den), Some(vec![1]));
    }
}
