//! Finite quadratic forms: a finite abelian group `⊕ Z/d_i` with a `Q/2Z`-valued
//! quadratic form and the associated `Q/Z`-valued bilinear form.
//!
//! Values are stored as integer numerators over the group exponent `e`:
//! `q(g_i) = num[i][i] / e mod 2` and `b(g_i, g_j) = num[i][j] / e mod 1`.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use num_integer::Integer;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{LatticeError, Result};
use crate::linalg::{self, IMat};

pub type Elem = Vec<i64>;
pub type R64 = Ratio<i64>;

/// Default cap on the group order for brute-force operations.
pub const GROUP_BUDGET: i64 = 10_000;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Fqf {
    orders: Vec<i64>,
    exp: i64,
    num: IMat,
}

/// Homomorphism given by the images of the source generators.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FqfMap {
    pub images: IMat,
}

impl FqfMap {
    pub fn identity(q: &Fqf) -> FqfMap {
        FqfMap {
            images: (0..q.rank())
                .map(|i| (0..q.rank()).map(|j| i64::from(i == j)).collect())
                .collect(),
        }
    }

    pub fn apply(&self, target: &Fqf, x: &[i64]) -> Elem {
        let mut out = vec![0i64; target.rank()];
        for (i, &c) in x.iter().enumerate() {
            if c == 0 {
                continue;
            }
            for j in 0..target.rank() {
                out[j] += c * self.images[i][j];
            }
        }
        target.reduce(&out)
    }

    /// `self ∘ other` for endomorphisms of `q`.
    pub fn compose(&self, other: &FqfMap, q: &Fqf) -> FqfMap {
        FqfMap {
            images: other.images.iter().map(|y| self.apply(q, y)).collect(),
        }
    }

    pub fn is_identity(&self, q: &Fqf) -> bool {
        (0..q.rank()).all(|i| {
            let mut e = vec![0; q.rank()];
            e[i] = 1;
            q.reduce(&self.images[i]) == q.reduce(&e)
        })
    }
}

/// Serializable text form: orders plus the rational q-matrix as strings.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FqfRecord {
    pub orders: Vec<i64>,
    pub q_matrix: Vec<Vec<String>>,
}

impl Fqf {
    pub fn trivial() -> Fqf {
        Fqf { orders: Vec::new(), exp: 1, num: Vec::new() }
    }

    /// Build from numerators over `exp`; `exp` must be a multiple of every order.
    pub fn from_numerators(orders: Vec<i64>, exp: i64, num: IMat) -> Result<Fqf> {
        let k = orders.len();
        if num.len() != k || num.iter().any(|r| r.len() != k) {
            return Err(LatticeError::BadMap("q-matrix shape".into()));
        }
        if orders.iter().any(|&d| d < 2 || exp % d != 0) {
            return Err(LatticeError::BadMap("orders must be >= 2 and divide the exponent".into()));
        }
        let true_exp = orders.iter().fold(1i64, |a, &d| a.lcm(&d));
        // Rescale to the true exponent.
        let mut n = linalg::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                if num[i][j] != num[j][i] {
                    return Err(LatticeError::BadMap("q-matrix not symmetric".into()));
                }
                let v = num[i][j] as i128 * true_exp as i128;
                if v % exp as i128 != 0 {
                    return Err(LatticeError::BadMap("value not in (1/e)Z".into()));
                }
                let v = linalg::narrow(v / exp as i128);
                n[i][j] = if i == j { v.rem_euclid(2 * true_exp) } else { v.rem_euclid(true_exp) };
            }
        }
        for i in 0..k {
            for j in 0..k {
                if (orders[i] as i128 * n[i][j] as i128) % true_exp as i128 != 0 {
                    return Err(LatticeError::BadMap(format!("d_{i} b(g_{i}, g_{j}) is not integral")));
                }
            }
            let d = orders[i] as i128;
            if (d * d * n[i][i] as i128) % (2 * true_exp as i128) != 0 {
                return Err(LatticeError::BadMap(format!("q(d_{i} g_{i}) is not 0 mod 2")));
            }
        }
        Ok(Fqf { orders, exp: true_exp, num: n })
    }

    /// Build from rational values (`q` on the diagonal, `b` off it).
    pub fn from_q_matrix(orders: Vec<i64>, q: &[Vec<R64>]) -> Result<Fqf> {
        let e = orders.iter().fold(1i64, |a, &d| a.lcm(&d));
        let den = q.iter().flatten().fold(e, |a, x| a.lcm(x.denom()));
        let num: IMat = q
            .iter()
            .map(|r| r.iter().map(|x| x.numer() * (den / x.denom())).collect())
            .collect();
        let mut keep: Vec<usize> = Vec::new();
        for (i, &d) in orders.iter().enumerate() {
            if d > 1 {
                keep.push(i);
            }
        }
        if keep.len() != orders.len() {
            let o = keep.iter().map(|&i| orders[i]).collect();
            let n: IMat = keep.iter().map(|&i| keep.iter().map(|&j| num[i][j]).collect()).collect();
            return Fqf::from_numerators(o, den, n);
        }
        Fqf::from_numerators(orders, den, num)
    }

    pub fn to_record(&self) -> FqfRecord {
        FqfRecord {
            orders: self.orders.clone(),
            q_matrix: self
                .q_matrix()
                .iter()
                .map(|r| r.iter().map(|x| x.to_string()).collect())
                .collect(),
        }
    }

    pub fn from_record(r: &FqfRecord) -> Result<Fqf> {
        let q: Result<Vec<Vec<R64>>> = r
            .q_matrix
            .iter()
            .map(|row| {
                row.iter()
                    .map(|s| {
                        s.parse::<R64>()
                            .map_err(|_| LatticeError::BadMap(format!("bad rational {s}")))
                    })
                    .collect()
            })
            .collect();
        Fqf::from_q_matrix(r.orders.clone(), &q?)
    }

    pub fn orders(&self) -> &[i64] {
        &self.orders
    }

    /// Number of cyclic factors (the length when the orders are a Smith chain).
    pub fn rank(&self) -> usize {
        self.orders.len()
    }

    pub fn order(&self) -> i64 {
        self.orders.iter().product()
    }

    pub fn exponent(&self) -> i64 {
        self.exp
    }

    pub fn numerators(&self) -> &IMat {
        &self.num
    }

    pub fn is_trivial(&self) -> bool {
        self.orders.is_empty()
    }

    pub fn reduce(&self, x: &[i64]) -> Elem {
        x.iter().zip(&self.orders).map(|(&c, &d)| c.rem_euclid(d)).collect()
    }

    pub fn zero(&self) -> Elem {
        vec![0; self.rank()]
    }

    pub fn add(&self, x: &[i64], y: &[i64]) -> Elem {
        x.iter()
            .zip(y)
            .zip(&self.orders)
            .map(|((&a, &b), &d)| (a + b).rem_euclid(d))
            .collect()
    }

    pub fn neg(&self, x: &[i64]) -> Elem {
        self.scale(x, -1)
    }

    pub fn scale(&self, x: &[i64], n: i64) -> Elem {
        x.iter().zip(&self.orders).map(|(&a, &d)| (a * n).rem_euclid(d)).collect()
    }

    /// Numerator of `q(x)` over the exponent, in `[0, 2e)`.
    pub fn q_num(&self, x: &[i64]) -> i64 {
        let k = self.rank();
        let mut s: i128 = 0;
        for i in 0..k {
            if x[i] == 0 {
                continue;
            }
            s += (x[i] as i128) * (x[i] as i128) * self.num[i][i] as i128;
            for j in i + 1..k {
                s += 2 * (x[i] as i128) * (x[j] as i128) * self.num[i][j] as i128;
            }
        }
        linalg::narrow(s.rem_euclid(2 * self.exp as i128))
    }

    /// Numerator of `b(x, y)` over the exponent, in `[0, e)`.
    pub fn b_num(&self, x: &[i64], y: &[i64]) -> i64 {
        let k = self.rank();
        let mut s: i128 = 0;
        for i in 0..k {
            if x[i] == 0 {
                continue;
            }
            for j in 0..k {
                s += (x[i] as i128) * (y[j] as i128) * self.num[i][j] as i128;
            }
        }
        linalg::narrow(s.rem_euclid(self.exp as i128))
    }

    /// `q(x)` in `[0, 2)`.
    pub fn eval_q(&self, x: &[i64]) -> R64 {
        R64::new(self.q_num(x), self.exp)
    }

    /// `b(x, y)` in `[0, 1)`.
    pub fn eval_b(&self, x: &[i64], y: &[i64]) -> R64 {
        R64::new(self.b_num(x, y), self.exp)
    }

    /// Generator values: `q` on the diagonal, `b` off it.
    pub fn q_matrix(&self) -> Vec<Vec<R64>> {
        (0..self.rank())
            .map(|i| (0..self.rank()).map(|j| R64::new(self.num[i][j], self.exp)).collect())
            .collect()
    }

    pub fn element_order(&self, x: &[i64]) -> i64 {
        x.iter()
            .zip(&self.orders)
            .fold(1i64, |acc, (&c, &d)| acc.lcm(&(d / c.gcd(&d))))
    }

    pub fn index_of(&self, x: &[i64]) -> usize {
        let mut idx = 0usize;
        for (&c, &d) in x.iter().zip(&self.orders) {
            idx = idx * d as usize + c.rem_euclid(d) as usize;
        }
        idx
    }

    pub fn element(&self, mut idx: usize) -> Elem {
        let mut out = vec![0i64; self.rank()];
        for i in (0..self.rank()).rev() {
            let d = self.orders[i] as usize;
            out[i] = (idx % d) as i64;
            idx /= d;
        }
        out
    }

    /// All elements, in index order.
    pub fn elements(&self) -> Vec<Elem> {
        (0..self.order() as usize).map(|i| self.element(i)).collect()
    }

    pub(crate) fn check_budget(&self, what: &str) -> Result<()> {
        if self.order() > GROUP_BUDGET {
            return Err(LatticeError::Budget(format!(
                "{what}: group of order {} exceeds {}",
                self.order(),
                GROUP_BUDGET
            )));
        }
        Ok(())
    }

    pub fn negate(&self) -> Fqf {
        let k = self.rank();
        let mut n = self.num.clone();
        for i in 0..k {
            for j in 0..k {
                n[i][j] = if i == j {
                    (-n[i][j]).rem_euclid(2 * self.exp)
                } else {
                    (-n[i][j]).rem_euclid(self.exp)
                };
            }
        }
        Fqf { orders: self.orders.clone(), exp: self.exp, num: n }
    }

    pub fn direct_sum(&self, other: &Fqf) -> Fqf {
        let e = self.exp.lcm(&other.exp);
        let k1 = self.rank();
        let k = k1 + other.rank();
        let mut n = linalg::zeros(k, k);
        for i in 0..k1 {
            for j in 0..k1 {
                n[i][j] = self.num[i][j] * (e / self.exp);
            }
        }
        for i in 0..other.rank() {
            for j in 0..other.rank() {
                n[k1 + i][k1 + j] = other.num[i][j] * (e / other.exp);
            }
        }
        let mut orders = self.orders.clone();
        orders.extend_from_slice(&other.orders);
        if orders.is_empty() {
            return Fqf::trivial();
        }
        Fqf::from_numerators(orders, e, n).expect("sum of valid forms")
    }

    /// `δ = 1` iff some element of order 2 has `q = ±1/2 mod 2`.
    pub fn parity(&self) -> u8 {
        let two = self.two_torsion();
        u8::from(two.iter().any(|x| {
            let q = self.eval_q(x);
            q == R64::new(1, 2) || q == R64::new(3, 2)
        }))
    }

    /// Elements of order exactly 2.
    pub fn two_torsion(&self) -> Vec<Elem> {
        let k = self.rank();
        let even: Vec<usize> = (0..k).filter(|&i| self.orders[i] % 2 == 0).collect();
        let mut out = Vec::new();
        for mask in 1u32..(1u32 << even.len()) {
            let mut x = vec![0i64; k];
            for (b, &i) in even.iter().enumerate() {
                if mask >> b & 1 == 1 {
                    x[i] = self.orders[i] / 2;
                }
            }
            out.push(x);
        }
        out
    }

    /// Minimal number of generators.
    pub fn length(&self) -> usize {
        let mut primes = BTreeSet::new();
        for &d in &self.orders {
            for p in prime_factors(d) {
                primes.insert(p);
            }
        }
        primes.into_iter().map(|p| self.p_length(p)).max().unwrap_or(0)
    }

    /// Number of cyclic factors of order divisible by `p`.
    pub fn p_length(&self, p: i64) -> usize {
        self.orders.iter().filter(|&&d| d % p == 0).count()
    }

    /// Equal order, p-lengths, parity, and q-value multiset.
    pub fn cheap_invariants(&self) -> (i64, Vec<i64>, Vec<(R64, i64, usize)>) {
        let mut counts: HashMap<(R64, i64), usize> = HashMap::new();
        if self.order() <= GROUP_BUDGET {
            for x in self.elements() {
                *counts.entry((self.eval_q(&x), self.element_order(&x))).or_default() += 1;
            }
        }
        let mut v: Vec<(R64, i64, usize)> = counts.into_iter().map(|((q, o), c)| (q, o, c)).collect();
        v.sort();
        let mut ord = self.orders.clone();
        ord.sort();
        (self.order(), ord, v)
    }

    // ---- subgroups -----------------------------------------------------

    /// Sorted element indices of the subgroup generated by `gens`.
    pub fn span(&self, gens: &[Elem]) -> Vec<usize> {
        let mut seen: HashSet<usize> = HashSet::new();
        let zero = self.zero();
        seen.insert(self.index_of(&zero));
        let mut queue = VecDeque::from([zero]);
        while let Some(x) = queue.pop_front() {
            for g in gens {
                let y = self.add(&x, g);
                if seen.insert(self.index_of(&y)) {
                    queue.push_back(y);
                }
            }
        }
        let mut v: Vec<usize> = seen.into_iter().collect();
        v.sort_unstable();
        v
    }

    /// Order of the subgroup generated by `gens` (Hermite-form determinant).
    pub fn span_order(&self, gens: &[Elem]) -> i64 {
        let k = self.rank();
        if k == 0 {
            return 1;
        }
        let mut rows: IMat = gens.to_vec();
        for i in 0..k {
            let mut r = vec![0; k];
            r[i] = self.orders[i];
            rows.push(r);
        }
        let h = linalg::hnf_rows(&rows);
        let full: i64 = h.iter().enumerate().map(|(i, r)| r[i]).product();
        self.order() / full
    }

    /// Every subgroup exactly once (as sorted element indices), smallest first.
    pub fn subgroups(&self) -> Result<Vec<Vec<usize>>> {
        self.check_budget("subgroups")?;
        let elems = self.elements();
        let mut found: HashSet<Vec<usize>> = HashSet::new();
        let trivial = vec![self.index_of(&self.zero())];
        found.insert(trivial.clone());
        let mut queue = VecDeque::from([trivial]);
        let mut count = 0usize;
        while let Some(s) = queue.pop_front() {
            let members: HashSet<usize> = s.iter().copied().collect();
            for (i, x) in elems.iter().enumerate() {
                if members.contains(&i) {
                    continue;
                }
                let mut gens: Vec<Elem> = s.iter().map(|&j| elems[j].clone()).collect();
                gens.push(x.clone());
                let t = self.span(&gens);
                if found.insert(t.clone()) {
                    count += 1;
                    if count > 200_000 {
                        return Err(LatticeError::Budget("too many subgroups".into()));
                    }
                    queue.push_back(t);
                }
            }
        }
        let mut v: Vec<Vec<usize>> = found.into_iter().collect();
        v.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        Ok(v)
    }

    pub fn image_of_subgroup(&self, s: &[usize], g: &FqfMap) -> Vec<usize> {
        let mut v: Vec<usize> = s.iter().map(|&i| self.index_of(&g.apply(self, &self.element(i)))).collect();
        v.sort_unstable();
        v
    }

    /// One representative per orbit of `subgroups` under the group generated by
    /// `maps`: the member with lexicographically smallest sorted element list.
    pub fn orbit_representatives(&self, subgroups: &[Vec<usize>], maps: &[FqfMap]) -> Vec<Vec<usize>> {
        let mut seen: HashSet<Vec<usize>> = HashSet::new();
        let mut reps = Vec::new();
        for s in subgroups {
            if seen.contains(s) {
                continue;
            }
            let mut orbit = vec![s.clone()];
            seen.insert(s.clone());
            let mut i = 0;
            while i < orbit.len() {
                for g in maps {
                    let t = self.image_of_subgroup(&orbit[i], g);
                    if seen.insert(t.clone()) {
                        orbit.push(t);
                    }
                }
                i += 1;
            }
            reps.push(orbit.into_iter().min().unwrap());
        }
        reps.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        reps
    }

    /// Generators of `S^⊥ = {x : b(x, s) = 0 for s in gens}`.
    pub fn orthogonal(&self, gens: &[Elem]) -> Vec<Elem> {
        let k = self.rank();
        if k == 0 {
            return Vec::new();
        }
        let t = gens.len();
        if t == 0 {
            return (0..k)
                .map(|i| {
                    let mut e = vec![0; k];
                    e[i] = 1;
                    e
                })
                .collect();
        }
        // Solve sum_i z_i b_num(g_i, s) + e w_s = 0 over Z.
        let mut a = linalg::zeros(t, k + t);
        for (r, s) in gens.iter().enumerate() {
            for i in 0..k {
                let mut gi = vec![0; k];
                gi[i] = 1;
                a[r][i] = self.b_num(&gi, s);
            }
            a[r][k + r] = self.exp;
        }
        let ker = linalg::kernel(&a, k + t);
        let proj: IMat = ker.iter().map(|r| self.reduce(&r[..k])).collect();
        let mut out: Vec<Elem> = proj.into_iter().filter(|x| x.iter().any(|&c| c != 0)).collect();
        out.sort();
        out.dedup();
        out
    }

    /// Is the subgroup generated by `gens` isotropic (`q = 0` on it)?
    pub fn is_isotropic(&self, gens: &[Elem]) -> bool {
        gens.iter().all(|x| self.q_num(x) == 0)
            && gens.iter().all(|x| gens.iter().all(|y| self.b_num(x, y) == 0))
    }

    /// The subquotient `S/T` (T ⊂ S, T ⊂ S^⊥, T isotropic) with its induced form.
    pub fn subquotient(&self, s_gens: &[Elem], t_gens: &[Elem]) -> Result<SubQuotient> {
        let k = self.rank();
        let rel: IMat = (0..k)
            .map(|i| {
                let mut r = vec![0; k];
                r[i] = self.orders[i];
                r
            })
            .collect();
        let lat = |gens: &[Elem]| -> IMat {
            let mut rows: IMat = gens.to_vec();
            rows.extend(rel.iter().cloned());
            linalg::hnf_rows(&rows)
        };
        if k == 0 {
            return Ok(SubQuotient { form: Fqf::trivial(), gens: Vec::new(), basis_s: Vec::new(), v: Vec::new() });
        }
        let bs = lat(s_gens);
        let bt = lat(t_gens);
        for x in t_gens {
            if self.q_num(x) != 0 || s_gens.iter().any(|y| self.b_num(x, y) != 0) {
                return Err(LatticeError::Gluing("quotient subgroup is not isotropic and orthogonal".into()));
            }
        }
        let c: Option<IMat> = bt.iter().map(|r| linalg::solve_rows_int(&bs, r)).collect();
        let c = c.ok_or_else(|| LatticeError::Gluing("T is not contained in S".into()))?;
        let sm = linalg::smith(&c);
        // Row span of C is that of D V^{-1}; quotient coordinates are y = c V.
        let mut gens = Vec::new();
        let mut orders = Vec::new();
        let mut keep = Vec::new();
        for i in 0..k {
            let d = sm.diag[i];
            if d > 1 {
                let row = &sm.v_inv[i];
                let amb = linalg::mul(&vec![row.clone()], &bs)[0].clone();
                gens.push(self.reduce(&amb));
                orders.push(d);
                keep.push(i);
            }
        }
        let mut q: Vec<Vec<R64>> = Vec::new();
        for (a, x) in gens.iter().enumerate() {
            let mut row = Vec::new();
            for (b, y) in gens.iter().enumerate() {
                row.push(if a == b { self.eval_q(x) } else { self.eval_b(x, y) });
            }
            q.push(row);
        }
        let form = if orders.is_empty() {
            Fqf::trivial()
        } else {
            Fqf::from_q_matrix(orders, &q)?
        };
        let v: IMat = sm.v.iter().map(|r| keep.iter().map(|&j| r[j]).collect()).collect();
        Ok(SubQuotient { form, gens, basis_s: bs, v })
    }

    /// Isometry test by brute force over generator images.
    pub fn isomorphism(&self, other: &Fqf) -> Result<Option<FqfMap>> {
        self.check_budget("isomorphism")?;
        other.check_budget("isomorphism")?;
        if self.order() != other.order() {
            return Ok(None);
        }
        if self.cheap_invariants() != other.cheap_invariants() {
            return Ok(None);
        }
        Ok(self.maps_into(other, true, Some(1)).into_iter().next())
    }

    pub fn is_isomorphic(&self, other: &Fqf) -> Result<bool> {
        Ok(self.isomorphism(other)?.is_some())
    }

    /// `O(q)`: identity first, then the remaining automorphisms in search order.
    pub fn orthogonal_group(&self) -> Result<Vec<FqfMap>> {
        self.check_budget("orthogonal group")?;
        let mut all = self.maps_into(self, true, None);
        let id = FqfMap::identity(self);
        all.retain(|m| *m != id);
        all.insert(0, id);
        Ok(all)
    }

    /// Injective isometric maps of `self` into `target`, by generator images.
    pub fn embeddings_into(&self, target: &Fqf) -> Result<Vec<FqfMap>> {
        self.check_budget("embeddings")?;
        target.check_budget("embeddings")?;
        let n = self.order();
        Ok(self
            .maps_into(target, false, None)
            .into_iter()
            .filter(|f| target.span_order(&f.images) == n)
            .collect())
    }

    /// Isometric embeddings (or bijections) of `self` into `target`.
    fn maps_into(&self, target: &Fqf, bijective: bool, limit: Option<usize>) -> Vec<FqfMap> {
        let k = self.rank();
        if k == 0 {
            return vec![FqfMap { images: Vec::new() }];
        }
        let elems = target.elements();
        let info: Vec<(i64, R64)> = elems.iter().map(|x| (target.element_order(x), target.eval_q(x))).collect();
        let gens: Vec<Elem> = (0..k)
            .map(|i| {
                let mut e = vec![0; k];
                e[i] = 1;
                e
            })
            .collect();
        let cands: Vec<Vec<usize>> = gens
            .iter()
            .map(|g| {
                let want = (self.element_order(g), self.eval_q(g));
                (0..elems.len()).filter(|&j| info[j] == want).collect()
            })
            .collect();
        let mut out = Vec::new();
        let mut chosen: Vec<usize> = Vec::new();
        self.maps_rec(target, &elems, &gens, &cands, &mut chosen, bijective, limit, &mut out);
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn maps_rec(
        &self,
        target: &Fqf,
        elems: &[Elem],
        gens: &[Elem],
        cands: &[Vec<usize>],
        chosen: &mut Vec<usize>,
        bijective: bool,
        limit: Option<usize>,
        out: &mut Vec<FqfMap>,
    ) {
        if limit.is_some_and(|l| out.len() >= l) {
            return;
        }
        let i = chosen.len();
        if i == gens.len() {
            let images: IMat = chosen.iter().map(|&j| elems[j].clone()).collect();
            if !bijective || target.span_order(&images) == target.order() {
                out.push(FqfMap { images });
            }
            return;
        }
        for &c in &cands[i] {
            let y = &elems[c];
            let ok = (0..i).all(|j| target.eval_b(y, &elems[chosen[j]]) == self.eval_b(&gens[i], &gens[j]));
            if !ok {
                continue;
            }
            chosen.push(c);
            self.maps_rec(target, elems, gens, cands, chosen, bijective, limit, out);
            chosen.pop();
            if limit.is_some_and(|l| out.len() >= l) {
                return;
            }
        }
    }

    /// Does `f` preserve `q` and define an automorphism?
    pub fn is_automorphism(&self, f: &FqfMap) -> bool {
        let k = self.rank();
        let gens: Vec<Elem> = (0..k)
            .map(|i| {
                let mut e = vec![0; k];
                e[i] = 1;
                e
            })
            .collect();
        (0..k).all(|i| {
            self.eval_q(&f.images[i]) == self.eval_q(&gens[i])
                && self.element_order(&f.images[i]) == self.orders[i]
                && (0..k).all(|j| self.eval_b(&f.images[i], &f.images[j]) == self.eval_b(&gens[i], &gens[j]))
        }) && self.span_order(&f.images) == self.order()
    }

    /// The `p`-primary part, as a form on its own generators.
    pub fn p_part(&self, p: i64) -> Fqf {
        let mut gens: Vec<(i64, Elem)> = Vec::new();
        for i in 0..self.rank() {
            let d = self.orders[i];
            let mut pk = 1;
            while d % (pk * p) == 0 {
                pk *= p;
            }
            if pk > 1 {
                let mut x = vec![0; self.rank()];
                x[i] = d / pk;
                gens.push((pk, x));
            }
        }
        gens.sort_by_key(|(o, _)| *o);
        let orders: Vec<i64> = gens.iter().map(|(o, _)| *o).collect();
        if orders.is_empty() {
            return Fqf::trivial();
        }
        let q: Vec<Vec<R64>> = gens
            .iter()
            .enumerate()
            .map(|(a, (_, x))| {
                gens.iter()
                    .enumerate()
                    .map(|(b, (_, y))| if a == b { self.eval_q(x) } else { self.eval_b(x, y) })
                    .collect()
            })
            .collect();
        Fqf::from_q_matrix(orders, &q).expect("p-part of a valid form")
    }

    pub fn primes(&self) -> Vec<i64> {
        let mut s = BTreeSet::new();
        for &d in &self.orders {
            s.extend(prime_factors(d));
        }
        s.into_iter().collect()
    }
}

/// A subquotient `S/T` with the data needed to map elements of `S` into it.
#[derive(Clone, Debug)]
pub struct SubQuotient {
    pub form: Fqf,
    /// Generators of the quotient, as ambient elements.
    pub gens: Vec<Elem>,
    basis_s: IMat,
    v: IMat,
}

impl SubQuotient {
    /// Coordinates in the quotient of an ambient element of `S`.
    pub fn project(&self, x: &[i64]) -> Option<Elem> {
        if self.form.is_trivial() {
            return Some(Vec::new());
        }
        // Ambient elements are classes mod the relation lattice, which lies in S.
        let c = linalg::solve_rows_int(&self.basis_s, x)?;
        let y: Vec<i64> = (0..self.v[0].len())
            .map(|j| linalg::narrow(c.iter().enumerate().map(|(i, &ci)| ci as i128 * self.v[i][j] as i128).sum()))
            .collect();
        Some(self.form.reduce(&y))
    }
}

/// `Γ^⊥/Γ` for the graph `Γ = {(x, γx)}` of an anti-isometry `γ: H → H'`
/// (`q_N(γx) = -q_M(x)`), computed inside `q_M ⊕ q_N`.
pub fn graph_quotient(qm: &Fqf, qn: &Fqf, h_gens: &[Elem], gamma_images: &[Elem]) -> Result<Fqf> {
    if h_gens.len() != gamma_images.len() {
        return Err(LatticeError::Gluing("generator count mismatch".into()));
    }
    let sum = qm.direct_sum(qn);
    let graph: Vec<Elem> = h_gens
        .iter()
        .zip(gamma_images)
        .map(|(x, y)| {
            let mut v = x.clone();
            v.extend_from_slice(y);
            v
        })
        .collect();
    for (x, y) in h_gens.iter().zip(gamma_images) {
        if (qm.q_num(x) * (sum.exponent() / qm.exponent()) + qn.q_num(y) * (sum.exponent() / qn.exponent()))
            % (2 * sum.exponent())
            != 0
        {
            return Err(LatticeError::Gluing("γ is not an anti-isometry".into()));
        }
    }
    if !sum.is_isotropic(&graph) {
        return Err(LatticeError::Gluing("graph is not isotropic".into()));
    }
    // γ must be a well-defined injective homomorphism: |Γ| = |H|.
    if sum.span_order(&graph) != qm.span_order(h_gens) || qn.span_order(gamma_images) != qm.span_order(h_gens) {
        return Err(LatticeError::Gluing("γ is not a bijection onto its image".into()));
    }
    let perp = sum.orthogonal(&graph);
    Ok(sum.subquotient(&perp, &graph)?.form)
}

pub fn prime_factors(mut n: i64) -> Vec<i64> {
    let mut out = Vec::new();
    let mut p = 2;
    n = n.abs();
    while p * p <= n {
        if n % p == 0 {
            out.push(p);
            while n % p == 0 {
                n /= p;
            }
        }
        p += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{a, bl, d, rank1, u, Lattice};

    fn r(n: i64, d: i64) -> R64 {
        R64::new(n, d)
    }

    #[test]
    fn eval_examples() {
        let q = bl().disc_form();
        assert_eq!(q.eval_q(&[1, 0]), r(3, 2));
        assert_eq!(q.eval_q(&[0, 0]), r(0, 1));
        assert_eq!(a(2).unwrap().disc_form().eval_q(&[1]), r(4, 3));
    }

    #[test]
    fn orthogonal_groups() {
        assert_eq!(bl().disc_form().orthogonal_group().unwrap().len(), 2);
        assert_eq!(Fqf::trivial().orthogonal_group().unwrap().len(), 1);
        assert_eq!(a(2).unwrap().disc_form().orthogonal_group().unwrap().len(), 2);
    }

    #[test]
    fn isomorphism_examples() {
        let m2 = rank1(-2).unwrap();
        let two = m2.oplus(&m2);
        assert!(bl().disc_form().is_isomorphic(&two.disc_form()).unwrap());
        let a2 = a(2).unwrap();
        assert!(!a2.disc_form().is_isomorphic(&a2.negate().disc_form()).unwrap());
        let q = d(4).unwrap().disc_form();
        assert!(q.isomorphism(&q).unwrap().is_some());
        assert!(!bl().disc_form().is_isomorphic(&bl().disc_form().negate()).unwrap());
    }

    #[test]
    fn subgroup_counts() {
        let k4 = Fqf::from_q_matrix(vec![2, 2], &[vec![r(0, 1), r(0, 1)], vec![r(0, 1), r(0, 1)]]).unwrap();
        assert_eq!(k4.subgroups().unwrap().len(), 5);
        let z4 = rank1(-4).unwrap().disc_form();
        assert_eq!(z4.subgroups().unwrap().len(), 3);
        let q = bl().disc_form();
        let order2: Vec<Vec<usize>> = q.subgroups().unwrap().into_iter().filter(|s| s.len() == 2).collect();
        assert_eq!(q.orbit_representatives(&order2, &q.orthogonal_group().unwrap()).len(), 2);
    }

    #[test]
    fn negation() {
        let q = a(2).unwrap().disc_form();
        assert_eq!(q.negate().eval_q(&[1]), r(2, 3));
        assert_eq!(q.negate().negate(), q);
        assert!(Fqf::trivial().negate().is_trivial());
        assert_eq!(q.negate(), a(2).unwrap().negate().disc_form());
    }

    #[test]
    fn graph_quotients() {
        // Full gluing of N with N(-1) gives a unimodular overlattice.
        let n = a(2).unwrap();
        let qm = n.disc_form();
        let qn = n.negate().disc_form();
        let g = graph_quotient(&qm, &qn, &[vec![1]], &[vec![1]]).unwrap();
        assert!(g.is_trivial());
        // Trivial gluing gives the orthogonal sum.
        let g = graph_quotient(&qm, &qn, &[], &[]).unwrap();
        assert_eq!(g.order(), 9);
        // [-2] glued into a complement with form q(bL) + q([2]).
        let qm = rank1(-2).unwrap().disc_form();
        let qn = bl().disc_form().direct_sum(&rank1(2).unwrap().disc_form());
        let g = graph_quotient(&qm, &qn, &[vec![1]], &[vec![0, 0, 1]]).unwrap();
        assert_eq!(g.order() * 4, qm.order() * qn.order());
        assert_eq!(g.order(), 4);
        assert!(graph_quotient(&qm, &qn, &[vec![1]], &[vec![1, 0, 0]]).is_err());
    }

    #[test]
    fn parity_and_length() {
        let m2 = rank1(-2).unwrap();
        assert_eq!(m2.oplus(&m2).disc_form().parity(), 1);
        assert_eq!(u().rescale(2).unwrap().disc_form().parity(), 0);
        let q = bl().disc_form();
        assert_eq!((q.length(), q.p_length(2), q.p_length(3)), (2, 2, 0));
        let _ = Lattice::zero();
    }

    #[test]
    fn record_round_trip() {
        let q = d(4).unwrap().oplus(&a(2).unwrap()).disc_form();
        let rec = q.to_record();
        let back = Fqf::from_record(&rec).unwrap();
        assert_eq!(back, q);
        let json = serde_json::to_string(&rec).unwrap();
        let rec2: FqfRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(rec2, rec);
    }
}
