//! Arithmetic for prime-power finite fields and for the Frobenius-twisted
//! cyclic groups underlying the twisted graph families.
//!
//! Field elements are addressed by their index in 0..q, the base-p encoding
//! of their coefficient vector over the prime field (digit i is the
//! coefficient of x^i). The modulus is the lexicographically least monic
//! irreducible of the requested degree, "least" meaning smallest integer
//! encoding of the non-leading coefficients, so fields are reproducible.

use crate::error::{Error, Result};

/// Largest admissible field order.
pub const MAX_FIELD_ORDER: u64 = 1_000_000;
/// Largest admissible extension degree.
pub const MAX_FIELD_DEGREE: u32 = 12;
/// Largest admissible q for the cyclic Frobenius group model.
pub const MAX_MU_Q: u64 = 1_000_000;

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Writes q as p^k for a prime p, if possible.
pub fn prime_power_decompose(q: u64) -> Option<(u64, u32)> {
    if q < 2 {
        return None;
    }
    let mut p = 2u64;
    while p * p <= q {
        if q % p == 0 {
            let mut rest = q;
            let mut k = 0u32;
            while rest % p == 0 {
                rest /= p;
                k += 1;
            }
            return if rest == 1 { Some((p, k)) } else { None };
        }
        p += 1;
    }
    Some((q, 1))
}

/// The field F_{p^k} with a deterministic irreducible modulus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteField {
    p: u64,
    k: u32,
    q: u64,
    /// Monic modulus, coefficients low to high, length k+1. For k = 1 this
    /// is x itself and arithmetic is plain residue arithmetic mod p.
    modulus: Vec<u64>,
}

// Polynomial helpers over F_p; coefficients low to high with no trailing
// zeros (the zero polynomial is the empty vector).

fn poly_trim(mut f: Vec<u64>) -> Vec<u64> {
    while f.last() == Some(&0) {
        f.pop();
    }
    f
}

fn poly_mul(p: u64, f: &[u64], g: &[u64]) -> Vec<u64> {
    if f.is_empty() || g.is_empty() {
        return vec![];
    }
    let mut out = vec![0u64; f.len() + g.len() - 1];
    for (i, &a) in f.iter().enumerate() {
        if a == 0 {
            continue;
        }
        for (j, &b) in g.iter().enumerate() {
            out[i + j] = (out[i + j] + a * b) % p;
        }
    }
    poly_trim(out)
}

/// Remainder of f by the monic polynomial m.
fn poly_rem(p: u64, f: &[u64], m: &[u64]) -> Vec<u64> {
    let deg_m = m.len() - 1;
    let mut r = f.to_vec();
    while r.len() > deg_m {
        let lead = r[r.len() - 1];
        if lead != 0 {
            let shift = r.len() - 1 - deg_m;
            for (i, &c) in m.iter().enumerate() {
                let idx = shift + i;
                let sub = (lead * c) % p;
                r[idx] = (r[idx] + p - sub) % p;
            }
        }
        r.pop();
        r = poly_trim(r);
        if r.is_empty() {
            break;
        }
    }
    r
}

fn poly_gcd(p: u64, mut a: Vec<u64>, mut b: Vec<u64>) -> Vec<u64> {
    while !b.is_empty() {
        let mut monic = b.clone();
        // Make b monic so poly_rem applies.
        let inv = mod_inv(*monic.last().unwrap(), p);
        for c in &mut monic {
            *c = (*c * inv) % p;
        }
        let r = poly_rem(p, &a, &monic);
        a = b;
        b = r;
    }
    a
}

fn mod_pow(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * base % m;
        }
        base = base * base % m;
        exp >>= 1;
    }
    acc
}

fn mod_inv(a: u64, p: u64) -> u64 {
    mod_pow(a, p - 2, p)
}

/// x^(p^e) mod m by repeated Frobenius, i.e. e rounds of raising to p.
fn x_pow_p_tower(p: u64, e: u32, m: &[u64]) -> Vec<u64> {
    let mut cur = poly_rem(p, &[0, 1], m); // x
    for _ in 0..e {
        cur = poly_pow_mod(p, &cur, p, m);
    }
    cur
}

fn poly_pow_mod(p: u64, f: &[u64], mut exp: u64, m: &[u64]) -> Vec<u64> {
    let mut acc = vec![1u64];
    let mut base = f.to_vec();
    while exp > 0 {
        if exp & 1 == 1 {
            acc = poly_rem(p, &poly_mul(p, &acc, &base), m);
        }
        base = poly_rem(p, &poly_mul(p, &base, &base), m);
        exp >>= 1;
    }
    acc
}

/// Monic degree-k polynomial f is irreducible over F_p iff x^(p^k) = x
/// mod f and gcd(x^(p^(k/l)) - x, f) = 1 for every prime l dividing k.
fn is_irreducible(p: u64, f: &[u64]) -> bool {
    let k = (f.len() - 1) as u32;
    if k == 1 {
        return true;
    }
    let xq = x_pow_p_tower(p, k, f);
    // x^(p^k) - x must vanish mod f.
    let mut diff = xq.clone();
    if diff.len() < 2 {
        diff.resize(2, 0);
    }
    diff[1] = (diff[1] + p - 1) % p;
    if !poly_trim(diff).is_empty() {
        return false;
    }
    let mut l = 2u32;
    let mut rest = k;
    let mut prime_divisors = Vec::new();
    while l * l <= rest {
        if rest % l == 0 {
            prime_divisors.push(l);
            while rest % l == 0 {
                rest /= l;
            }
        }
        l += 1;
    }
    if rest > 1 {
        prime_divisors.push(rest);
    }
    for l in prime_divisors {
        let e = k / l;
        let xe = x_pow_p_tower(p, e, f);
        let mut diff = xe;
        if diff.len() < 2 {
            diff.resize(2, 0);
        }
        diff[1] = (diff[1] + p - 1) % p;
        let diff = poly_trim(diff);
        let g = poly_gcd(p, f.to_vec(), diff);
        if g.len() != 1 {
            return false;
        }
    }
    true
}

impl FiniteField {
    /// Constructs F_{p^k} with the deterministic modulus.
    pub fn new(p: u64, k: u32) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::invalid(format!("{p} is not prime")));
        }
        if k == 0 || k > MAX_FIELD_DEGREE {
            return Err(Error::invalid(format!(
                "degree {k} must lie in 1..={MAX_FIELD_DEGREE}"
            )));
        }
        let q = p.checked_pow(k).filter(|&q| q <= MAX_FIELD_ORDER).ok_or_else(|| {
            Error::budget(format!("field order p^k exceeds {MAX_FIELD_ORDER}"))
        })?;
        let modulus = if k == 1 {
            vec![0, 1] // plain residue arithmetic
        } else {
            // Smallest integer encoding of the non-leading coefficients.
            let mut found = None;
            for enc in 0..q {
                let mut f = Self::digits(enc, p, k as usize);
                f.push(1);
                if is_irreducible(p, &f) {
                    found = Some(f);
                    break;
                }
            }
            found.expect("an irreducible of every degree exists")
        };
        Ok(FiniteField { p, k, q, modulus })
    }

    /// Parses "p^k" or a plain prime power "q".
    pub fn parse(spec: &str) -> Result<Self> {
        if let Some((ps, ks)) = spec.split_once('^') {
            let p: u64 = ps
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("bad field spec {spec:?}")))?;
            let k: u32 = ks
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("bad field spec {spec:?}")))?;
            FiniteField::new(p, k)
        } else {
            let q: u64 = spec
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("bad field spec {spec:?}")))?;
            FiniteField::from_order(q)
        }
    }

    /// Constructs the field of the given prime-power order.
    pub fn from_order(q: u64) -> Result<Self> {
        let (p, k) = prime_power_decompose(q)
            .ok_or_else(|| Error::invalid(format!("{q} is not a prime power")))?;
        FiniteField::new(p, k)
    }

    fn digits(mut n: u64, p: u64, len: usize) -> Vec<u64> {
        let mut out = Vec::with_capacity(len);
        for _ in 0..len {
            out.push(n % p);
            n /= p;
        }
        out
    }

    fn encode(&self, f: &[u64]) -> u64 {
        let mut acc = 0u64;
        for &c in f.iter().rev() {
            acc = acc * self.p + c;
        }
        acc
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn degree(&self) -> u32 {
        self.k
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn modulus(&self) -> &[u64] {
        &self.modulus
    }

    pub fn elements(&self) -> impl Iterator<Item = u64> {
        0..self.q
    }

    pub fn add(&self, a: u64, b: u64) -> u64 {
        if self.k == 1 {
            return (a + b) % self.p;
        }
        let da = Self::digits(a, self.p, self.k as usize);
        let db = Self::digits(b, self.p, self.k as usize);
        let sum: Vec<u64> = da.iter().zip(&db).map(|(&x, &y)| (x + y) % self.p).collect();
        self.encode(&sum)
    }

    pub fn neg(&self, a: u64) -> u64 {
        if self.k == 1 {
            return (self.p - a % self.p) % self.p;
        }
        let da = Self::digits(a, self.p, self.k as usize);
        let neg: Vec<u64> = da.iter().map(|&x| (self.p - x) % self.p).collect();
        self.encode(&neg)
    }

    pub fn sub(&self, a: u64, b: u64) -> u64 {
        self.add(a, self.neg(b))
    }

    pub fn mul(&self, a: u64, b: u64) -> u64 {
        if self.k == 1 {
            return a * b % self.p;
        }
        let da = poly_trim(Self::digits(a, self.p, self.k as usize));
        let db = poly_trim(Self::digits(b, self.p, self.k as usize));
        let prod = poly_rem(self.p, &poly_mul(self.p, &da, &db), &self.modulus);
        let mut padded = prod;
        padded.resize(self.k as usize, 0);
        self.encode(&padded)
    }

    pub fn pow(&self, a: u64, mut e: u64) -> u64 {
        let mut acc = 1u64;
        let mut base = a;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    pub fn inv(&self, a: u64) -> Result<u64> {
        if a == 0 {
            return Err(Error::invalid("zero has no multiplicative inverse"));
        }
        Ok(self.pow(a, self.q - 2))
    }

    /// Indicator over element indices of the set of e-th powers {z^e}.
    pub fn power_residue_indicator(&self, e: u64) -> Vec<bool> {
        let mut ind = vec![false; self.q as usize];
        for z in self.elements() {
            ind[self.pow(z, e) as usize] = true;
        }
        ind
    }

    /// The set {z^2 : z in F_q}, sorted by element index.
    pub fn squares(&self) -> Vec<u64> {
        self.power_residue_indicator(2)
            .iter()
            .enumerate()
            .filter_map(|(i, &s)| s.then_some(i as u64))
            .collect()
    }

    /// The set {z^3 : z in F_q}, sorted by element index.
    pub fn cubes(&self) -> Vec<u64> {
        self.power_residue_indicator(3)
            .iter()
            .enumerate()
            .filter_map(|(i, &s)| s.then_some(i as u64))
            .collect()
    }
}

/// The cyclic group of (2q+1)-th roots of unity with the Frobenius x -> x^q,
/// modelled on exponents: elements are residues mod 2q+1, multiplication is
/// exponent addition, and the Frobenius multiplies exponents by q.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CyclicFrobenius {
    q: u64,
    order: u64,
}

impl CyclicFrobenius {
    pub fn new(q: u64) -> Result<Self> {
        if q > MAX_MU_Q {
            return Err(Error::budget(format!("q = {q} exceeds {MAX_MU_Q}")));
        }
        if prime_power_decompose(q).is_none() {
            return Err(Error::invalid(format!("q = {q} is not a prime power")));
        }
        Ok(CyclicFrobenius { q, order: 2 * q + 1 })
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn order(&self) -> u64 {
        self.order
    }

    pub fn frobenius_multiplier(&self) -> u64 {
        self.q % self.order
    }

    pub fn identity(&self) -> u64 {
        0
    }

    pub fn elements(&self) -> impl Iterator<Item = u64> {
        0..self.order
    }

    /// Group multiplication (exponent addition).
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        (a + b) % self.order
    }

    /// The Frobenius action.
    pub fn sigma(&self, a: u64) -> u64 {
        a % self.order * (self.q % self.order) % self.order
    }

    /// Whether the group contains a primitive cube root of unity.
    pub fn has_primitive_cube_root(&self) -> bool {
        self.order % 3 == 0
    }

    /// The exponent of the least primitive cube root of unity, if any.
    pub fn primitive_cube_root(&self) -> Option<u64> {
        self.has_primitive_cube_root().then_some(self.order / 3)
    }

    /// Whether `a` is a cube in the group: solvable a = 3c mod order, i.e.
    /// gcd(3, order) divides a.
    pub fn is_cube(&self, a: u64) -> bool {
        if self.order % 3 != 0 {
            true
        } else {
            a % 3 == 0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prime_and_prime_power_detection() {
        assert!(is_prime(2) && is_prime(13) && is_prime(997));
        assert!(!is_prime(1) && !is_prime(4) && !is_prime(91));
        assert_eq!(prime_power_decompose(8), Some((2, 3)));
        assert_eq!(prime_power_decompose(121), Some((11, 2)));
        assert_eq!(prime_power_decompose(6), None);
        assert_eq!(prime_power_decompose(1), None);
    }

    #[test]
    fn make_field_cases() {
        let f5 = FiniteField::new(5, 1).unwrap();
        assert_eq!(f5.q(), 5);
        assert_eq!(f5.modulus(), &[0, 1]);

        let f4 = FiniteField::new(2, 2).unwrap();
        assert_eq!(f4.modulus(), &[1, 1, 1]); // x^2 + x + 1

        assert!(FiniteField::new(4, 1).is_err());
        assert!(FiniteField::new(2, 13).is_err());
        assert!(matches!(FiniteField::new(2, 12), Ok(_)));
        assert!(FiniteField::new(101, 3).is_err()); // order over budget
    }

    #[test]
    fn parse_specs() {
        assert_eq!(FiniteField::parse("2^4").unwrap().q(), 16);
        assert_eq!(FiniteField::parse("49").unwrap().q(), 49);
        assert!(FiniteField::parse("6").is_err());
        assert!(FiniteField::parse("x").is_err());
    }

    #[test]
    fn field_ops_cases() {
        let f5 = FiniteField::new(5, 1).unwrap();
        assert_eq!(f5.inv(2).unwrap(), 3);
        assert!(f5.inv(0).is_err());

        // x * x = x + 1 in F_4 with modulus x^2 + x + 1; x encodes as 2.
        let f4 = FiniteField::new(2, 2).unwrap();
        assert_eq!(f4.mul(2, 2), 3);

        // The Frobenius x -> x^q fixes every element.
        for f in [FiniteField::new(7, 1).unwrap(), FiniteField::new(3, 2).unwrap(), f4] {
            for x in f.elements() {
                assert_eq!(f.pow(x, f.q()), x);
            }
        }
    }

    #[test]
    fn inverses_multiply_to_one() {
        for f in [
            FiniteField::new(2, 3).unwrap(),
            FiniteField::new(13, 1).unwrap(),
            FiniteField::new(3, 3).unwrap(),
        ] {
            for x in 1..f.q() {
                assert_eq!(f.mul(x, f.inv(x).unwrap()), 1);
            }
        }
    }

    #[test]
    fn squares_and_cubes_cases() {
        let f7 = FiniteField::new(7, 1).unwrap();
        assert_eq!(f7.cubes(), vec![0, 1, 6]);

        let f5 = FiniteField::new(5, 1).unwrap();
        assert_eq!(f5.cubes(), vec![0, 1, 2, 3, 4]);

        let f4 = FiniteField::new(2, 2).unwrap();
        assert_eq!(f4.squares().len(), 4);
    }

    #[test]
    fn square_counts_by_parity() {
        for q in [3u64, 5, 7, 9, 11, 13, 25, 27] {
            let f = FiniteField::from_order(q).unwrap();
            assert_eq!(f.squares().len() as u64, (q + 1) / 2);
        }
        for q in [2u64, 4, 8, 16] {
            let f = FiniteField::from_order(q).unwrap();
            assert_eq!(f.squares().len() as u64, q);
        }
    }

    #[test]
    fn wilson_product_over_units() {
        // Product over the multiplicative group equals -1, for every
        // constructible field of order up to 100.
        for q in (2u64..=100).filter(|&q| prime_power_decompose(q).is_some()) {
            let f = FiniteField::from_order(q).unwrap();
            let mut prod = 1u64;
            for x in 1..q {
                prod = f.mul(prod, x);
            }
            assert_eq!(prod, f.neg(1), "q = {q}");
        }
    }

    #[test]
    fn mu_group_cases() {
        let g2 = CyclicFrobenius::new(2).unwrap();
        assert_eq!(g2.order(), 5);
        assert!(g2.elements().all(|a| g2.is_cube(a)));

        let g4 = CyclicFrobenius::new(4).unwrap();
        assert_eq!(g4.order(), 9);
        let cubes: Vec<u64> = g4.elements().filter(|&a| g4.is_cube(a)).collect();
        assert_eq!(cubes, vec![0, 3, 6]);

        assert!(CyclicFrobenius::new(6).is_err());
    }

    #[test]
    fn sigma_is_a_homomorphism() {
        let g = CyclicFrobenius::new(8).unwrap();
        for a in g.elements() {
            for b in g.elements() {
                assert_eq!(g.sigma(g.mul(a, b)), g.mul(g.sigma(a), g.sigma(b)));
            }
        }
    }

    #[test]
    fn defining_relation_holds_group_wide() {
        // x sigma(x)^2 = 1 reads a + 2qa = a(2q+1) = 0 mod 2q+1.
        for q in [2u64, 3, 4, 5, 8, 13] {
            let g = CyclicFrobenius::new(q).unwrap();
            for a in g.elements() {
                let lhs = g.mul(a, g.mul(g.sigma(a), g.sigma(a)));
                assert_eq!(lhs, g.identity());
            }
        }
    }

    #[test]
    fn minimal_containing_field_in_characteristic_two() {
        // The multiplicative order m of 2 mod 2q+1 satisfies 2^m = 4q^2.
        for q in [2u64, 4, 8] {
            let n = 2 * q + 1;
            let mut m = 1u32;
            let mut pow = 2u64 % n;
            while pow != 1 {
                pow = pow * 2 % n;
                m += 1;
            }
            assert_eq!(1u64 << m, 4 * q * q, "q = {q}");
        }
    }
}
