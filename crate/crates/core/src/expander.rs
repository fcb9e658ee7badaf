//! Desk-scale statistics for the expansion dichotomy of two-variable
//! morphisms: the image fraction of the quadruple map
//! (x, x', y, y') -> (f(x,y), f(x,y'), f(x',y), f(x',y')), and a probe that
//! measures how small |f(A, B)| can get over structured and random sets.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finfield::{CyclicFrobenius, FiniteField};
use crate::util::mix_seed;

/// Budget on |domain|^4 for exhaustive quadruple enumeration.
pub const MAX_QUADRUPLE_TUPLES: u64 = 100_000_000;
/// Largest q accepted by the expansion probe.
pub const MAX_PROBE_Q: u64 = 2000;

/// The catalog of probed morphisms. The first three act on F_q x F_q, the
/// twisted product on mu_{2q+1} x mu_{2q+1}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MorphismSpec {
    /// (x, y) -> x + y.
    Add,
    /// (x, y) -> x * y.
    Mul,
    /// (x, y) -> x^2 + y^3.
    AddSquareCube,
    /// (x, y) -> x * sigma(y) on the Frobenius-twisted cyclic group.
    MulTwist,
}

impl MorphismSpec {
    pub const ALL: [MorphismSpec; 4] = [
        MorphismSpec::Add,
        MorphismSpec::Mul,
        MorphismSpec::AddSquareCube,
        MorphismSpec::MulTwist,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            MorphismSpec::Add => "add",
            MorphismSpec::Mul => "mul",
            MorphismSpec::AddSquareCube => "add_square_cube",
            MorphismSpec::MulTwist => "mul_twist",
        }
    }

    /// Whether the morphism is a group law composed with coordinate maps,
    /// which forces the multiplicative syzygy on quadruple images.
    pub fn is_group_law(&self) -> bool {
        !matches!(self, MorphismSpec::AddSquareCube)
    }
}

impl std::fmt::Display for MorphismSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

impl std::str::FromStr for MorphismSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MorphismSpec::ALL
            .into_iter()
            .find(|m| m.tag() == s)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown morphism {s:?}; expected one of {}",
                    MorphismSpec::ALL.map(|m| m.tag()).join(", ")
                ))
            })
    }
}

/// The morphism evaluated on the whole domain, as a lookup table, plus the
/// domain/codomain size.
struct MorphismTable {
    size: u64,
    table: Vec<u64>, // table[x * size + y] = f(x, y)
}

fn build_table(f: MorphismSpec, q: u64) -> Result<MorphismTable> {
    match f {
        MorphismSpec::Add | MorphismSpec::Mul | MorphismSpec::AddSquareCube => {
            let field = FiniteField::from_order(q)?;
            let size = q;
            let mut table = vec![0u64; (size * size) as usize];
            for x in 0..size {
                for y in 0..size {
                    let v = match f {
                        MorphismSpec::Add => field.add(x, y),
                        MorphismSpec::Mul => field.mul(x, y),
                        MorphismSpec::AddSquareCube => {
                            field.add(field.mul(x, x), field.mul(field.mul(y, y), y))
                        }
                        MorphismSpec::MulTwist => unreachable!(),
                    };
                    table[(x * size + y) as usize] = v;
                }
            }
            Ok(MorphismTable { size, table })
        }
        MorphismSpec::MulTwist => {
            let g = CyclicFrobenius::new(q)?;
            let size = g.order();
            let mut table = vec![0u64; (size * size) as usize];
            for x in 0..size {
                for y in 0..size {
                    table[(x * size + y) as usize] = g.mul(x, g.sigma(y));
                }
            }
            Ok(MorphismTable { size, table })
        }
    }
}

/// Fraction of the codomain^4 hit by the quadruple map, by exhaustive
/// enumeration over all (x, x', y, y').
pub fn quadruple_image_ratio(f: MorphismSpec, q: u64) -> Result<f64> {
    let t = build_table(f, q)?;
    let n = t.size;
    let tuples = n.checked_pow(4).filter(|&c| c <= MAX_QUADRUPLE_TUPLES);
    if tuples.is_none() {
        return Err(Error::budget(format!(
            "quadruple enumeration needs |domain|^4 = {n}^4 <= {MAX_QUADRUPLE_TUPLES}"
        )));
    }
    let mut seen = vec![0u64; ((n * n * n * n + 63) / 64) as usize];
    for x in 0..n {
        for xp in 0..n {
            for y in 0..n {
                let f1 = t.table[(x * n + y) as usize];
                let f3 = t.table[(xp * n + y) as usize];
                let base = ((f1 * n + f3) * n) as u64;
                for yp in 0..n {
                    let f2 = t.table[(x * n + yp) as usize];
                    let f4 = t.table[(xp * n + yp) as usize];
                    let key = (base + f2) * n + f4;
                    seen[(key >> 6) as usize] |= 1u64 << (key & 63);
                }
            }
        }
    }
    let count: u64 = seen.iter().map(|w| w.count_ones() as u64).sum();
    Ok(count as f64 / (n as f64).powi(4))
}

/// |f(A, B)| / |codomain| for explicit index sets A and B.
pub fn image_fraction(f: MorphismSpec, q: u64, a: &[u64], b: &[u64]) -> Result<f64> {
    let t = build_table(f, q)?;
    let n = t.size;
    if a.iter().chain(b).any(|&x| x >= n) {
        return Err(Error::invalid("set element out of domain range"));
    }
    let mut seen = vec![false; n as usize];
    for &x in a {
        for &y in b {
            seen[t.table[(x * n + y) as usize] as usize] = true;
        }
    }
    Ok(seen.iter().filter(|&&s| s).count() as f64 / n as f64)
}

/// Probe verdict. "Constrained" requires a structured family (interval or
/// subgroup) with a very small image; "expanding" requires every probed
/// family to keep a large image. Report only, no claim of proof.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Constrained,
    Expanding,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Constrained => "constrained",
            Verdict::Expanding => "expanding",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// Report of one expansion probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpanderReport {
    pub q: u64,
    /// Exhaustive quadruple image fraction; absent when |domain|^4 is over
    /// budget.
    pub quadruple_ratio: Option<f64>,
    pub min_image_fraction: f64,
    /// Labels of the probed set families.
    pub probe_families: Vec<String>,
    pub verdict: Verdict,
}

fn divisors(n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 1;
    while d * d <= n {
        if n % d == 0 {
            out.push(d);
            if d != n / d {
                out.push(n / d);
            }
        }
        d += 1;
    }
    out.sort_unstable();
    out
}

/// Multiplicative subgroup of the given order inside the unit group,
/// expressed in element indices. Uses the least generator of the full unit
/// group.
fn field_subgroup(field: &FiniteField, order: u64) -> Vec<u64> {
    let q = field.q();
    let group_order = q - 1;
    let gen = (1..q)
        .find(|&g| {
            divisors(group_order)
                .into_iter()
                .filter(|&d| d < group_order)
                .all(|d| field.pow(g, d) != 1)
        })
        .expect("the unit group of a finite field is cyclic");
    let step = group_order / order;
    let mut out = Vec::with_capacity(order as usize);
    let mut cur = 1u64;
    let g = field.pow(gen, step);
    for _ in 0..order {
        out.push(cur);
        cur = field.mul(cur, g);
    }
    out
}

/// Probes the morphism with random sets, residue intervals, and
/// multiplicative subgroups, all of size at least C q^(1-c); reports the
/// smallest image fraction seen and a verdict at the 1/C and 1/(10C)
/// thresholds.
pub fn expansion_probe(
    f: MorphismSpec,
    q: u64,
    c: f64,
    big_c: f64,
    trials: u32,
    seed: u64,
) -> Result<ExpanderReport> {
    if q > MAX_PROBE_Q {
        return Err(Error::budget(format!("probe q = {q} exceeds {MAX_PROBE_Q}")));
    }
    if trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    if !(c > 0.0) || !(big_c > 0.0) {
        return Err(Error::invalid("constants c and C must be positive"));
    }
    let t = build_table(f, q)?;
    let n = t.size;
    let threshold = (big_c * (q as f64).powf(1.0 - c)).ceil().max(1.0) as u64;
    let threshold = threshold.min(n);

    let mut probe_families = Vec::new();
    let mut min_fraction = f64::INFINITY;
    let mut min_structured = f64::INFINITY;

    let mut eval = |a: &[u64], b: &[u64], label: String, structured: bool| -> Result<()> {
        let frac = image_fraction(f, q, a, b)?;
        if frac < min_fraction {
            min_fraction = frac;
        }
        if structured && frac < min_structured {
            min_structured = frac;
        }
        probe_families.push(label);
        Ok(())
    };

    // Residue intervals starting at zero.
    let mut lengths = vec![threshold, n / 2, n];
    lengths.sort_unstable();
    lengths.dedup();
    for len in lengths {
        if len < threshold || len == 0 {
            continue;
        }
        let interval: Vec<u64> = (0..len).collect();
        eval(&interval, &interval, format!("interval:{len}"), true)?;
    }

    // Multiplicative subgroups of every admissible order.
    match f {
        MorphismSpec::MulTwist => {
            for d in divisors(n) {
                if d >= threshold && d < n {
                    let step = n / d;
                    let sub: Vec<u64> = (0..d).map(|i| i * step).collect();
                    eval(&sub, &sub, format!("subgroup:{d}"), true)?;
                }
            }
        }
        _ => {
            let field = FiniteField::from_order(q)?;
            for d in divisors(q - 1) {
                if d >= threshold && d < q - 1 {
                    let sub = field_subgroup(&field, d);
                    eval(&sub, &sub, format!("subgroup:{d}"), true)?;
                }
            }
        }
    }

    // Seeded random sets of the threshold size.
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, trial as u64));
        let mut pool: Vec<u64> = (0..n).collect();
        pool.shuffle(&mut rng);
        let a: Vec<u64> = pool[..threshold as usize].to_vec();
        pool.shuffle(&mut rng);
        let b: Vec<u64> = pool[..threshold as usize].to_vec();
        eval(&a, &b, format!("random:{trial}"), false)?;
    }

    let verdict = if min_structured < 1.0 / (10.0 * big_c) {
        Verdict::Constrained
    } else if min_fraction >= 1.0 / big_c {
        Verdict::Expanding
    } else {
        Verdict::Inconclusive
    };

    let quadruple_ratio = match quadruple_image_ratio(f, q) {
        Ok(r) => Some(r),
        Err(Error::Budget(_)) => None,
        Err(e) => return Err(e),
    };

    Ok(ExpanderReport {
        q,
        quadruple_ratio,
        min_image_fraction: min_fraction,
        probe_families,
        verdict,
    })
}
