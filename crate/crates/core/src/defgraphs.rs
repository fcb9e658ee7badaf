//! The fixed catalog of definable bipartite graph families: generators at a
//! parameter q, arithmetic case classification, and the predicted limit
//! stepfunction for each case.
//!
//! Four families live on a finite field F_q (edge relations "x+y is a
//! square", "xy is a square", "x+y is a cube", "xy is a cube") and two on
//! the cyclic Frobenius group mu_{2q+1} ("xy is a cube", "x sigma(y) is a
//! cube", with cubes taken inside the group). Predicted limits are
//! representatives up to independent block permutations of the two sides;
//! equality against alternative forms is asserted through the cut distance,
//! never through matrix identity.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finfield::{prime_power_decompose, CyclicFrobenius, FiniteField};
use crate::graph::BipartiteGraph;
use crate::kernel::StepKernel;
use crate::matrix::Matrix;

/// Field families accept at most this many elements.
pub const MAX_FAMILY_FIELD_ORDER: u64 = 2000;
/// Group families accept at most this group order (2q+1).
pub const MAX_FAMILY_GROUP_ORDER: u64 = 4001;

/// Catalog identifiers. The `FromStr`/`Display` tags are the CLI names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyId {
    /// Edge iff x + y is a square in F_q.
    PaleySumSquares,
    /// Edge iff x * y is a square in F_q.
    ProdSquares,
    /// Edge iff x + y is a cube in F_q.
    SumCubes,
    /// Edge iff x * y is a cube in F_q.
    ProdCubes,
    /// Edge iff x * y is a cube inside mu_{2q+1}.
    FrobCubes,
    /// Edge iff x * sigma(y) is a cube inside mu_{2q+1}.
    FrobTwistedCubes,
}

impl FamilyId {
    pub const ALL: [FamilyId; 6] = [
        FamilyId::PaleySumSquares,
        FamilyId::ProdSquares,
        FamilyId::SumCubes,
        FamilyId::ProdCubes,
        FamilyId::FrobCubes,
        FamilyId::FrobTwistedCubes,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            FamilyId::PaleySumSquares => "paley_sum_squares",
            FamilyId::ProdSquares => "prod_squares",
            FamilyId::SumCubes => "sum_cubes",
            FamilyId::ProdCubes => "prod_cubes",
            FamilyId::FrobCubes => "frob_cubes",
            FamilyId::FrobTwistedCubes => "frob_twisted_cubes",
        }
    }

    /// True for the two families living on mu_{2q+1}.
    pub fn is_frobenius(&self) -> bool {
        matches!(self, FamilyId::FrobCubes | FamilyId::FrobTwistedCubes)
    }
}

impl fmt::Display for FamilyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for FamilyId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FamilyId::ALL
            .into_iter()
            .find(|fam| fam.tag() == s)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown family {s:?}; expected one of {}",
                    FamilyId::ALL.map(|f| f.tag()).join(", ")
                ))
            })
    }
}

fn validated_q(fam: FamilyId, q: u64) -> Result<(u64, u32)> {
    let (p, k) = prime_power_decompose(q)
        .ok_or_else(|| Error::invalid(format!("q = {q} is not a prime power")))?;
    if fam.is_frobenius() {
        if 2 * q + 1 > MAX_FAMILY_GROUP_ORDER {
            return Err(Error::budget(format!(
                "group order {} exceeds {MAX_FAMILY_GROUP_ORDER}",
                2 * q + 1
            )));
        }
    } else if q > MAX_FAMILY_FIELD_ORDER {
        return Err(Error::budget(format!(
            "field order {q} exceeds {MAX_FAMILY_FIELD_ORDER}"
        )));
    }
    Ok((p, k))
}

/// Generates the family instance at parameter q by direct evaluation of the
/// defining relation. Field family vertices are the field elements indexed
/// 0..q; group family vertices are the exponents 0..2q.
pub fn generate(fam: FamilyId, q: u64) -> Result<BipartiteGraph> {
    validated_q(fam, q)?;
    match fam {
        FamilyId::PaleySumSquares | FamilyId::SumCubes => {
            let field = FiniteField::from_order(q)?;
            let e = if fam == FamilyId::PaleySumSquares { 2 } else { 3 };
            let residues = field.power_residue_indicator(e);
            let n = q as usize;
            BipartiteGraph::from_predicate(n, n, |x, y| {
                residues[field.add(x as u64, y as u64) as usize]
            })
        }
        FamilyId::ProdSquares | FamilyId::ProdCubes => {
            let field = FiniteField::from_order(q)?;
            let e = if fam == FamilyId::ProdSquares { 2 } else { 3 };
            let residues = field.power_residue_indicator(e);
            let n = q as usize;
            BipartiteGraph::from_predicate(n, n, |x, y| {
                residues[field.mul(x as u64, y as u64) as usize]
            })
        }
        FamilyId::FrobCubes => {
            let g = CyclicFrobenius::new(q)?;
            let n = g.order() as usize;
            BipartiteGraph::from_predicate(n, n, |a, b| g.is_cube(g.mul(a as u64, b as u64)))
        }
        FamilyId::FrobTwistedCubes => {
            let g = CyclicFrobenius::new(q)?;
            let n = g.order() as usize;
            BipartiteGraph::from_predicate(n, n, |a, b| {
                g.is_cube(g.mul(a as u64, g.sigma(b as u64)))
            })
        }
    }
}

/// The arithmetic case of the family at q, decidable from q alone. For the
/// twisted family the case is determined by computing the Frobenius image
/// of the least primitive cube root of unity in the exponent model.
pub fn classify_case(fam: FamilyId, q: u64) -> Result<String> {
    validated_q(fam, q)?;
    Ok(match fam {
        FamilyId::PaleySumSquares | FamilyId::ProdSquares => {
            if q % 2 == 0 {
                "q even".into()
            } else {
                "q odd".into()
            }
        }
        FamilyId::SumCubes | FamilyId::ProdCubes => {
            if (q - 1) % 3 == 0 {
                "3|q-1".into()
            } else {
                "3!|q-1".into()
            }
        }
        FamilyId::FrobCubes => {
            if (2 * q + 1) % 3 == 0 {
                "3|2q+1".into()
            } else {
                "3!|2q+1".into()
            }
        }
        FamilyId::FrobTwistedCubes => {
            let g = CyclicFrobenius::new(q)?;
            match g.primitive_cube_root() {
                None => "case 1: 3!|2q+1".into(),
                Some(zeta) => {
                    let image = g.sigma(zeta);
                    if image == zeta {
                        "case 2: sigma(zeta)=zeta".into()
                    } else if image == g.mul(zeta, zeta) {
                        "case 3: sigma(zeta)=zeta^2".into()
                    } else {
                        "unreachable".into()
                    }
                }
            }
        }
    })
}

/// A predicted limit stepfunction for a family instance, valid up to
/// independent block permutations of the two sides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitPrediction {
    pub case_label: String,
    pub representative: StepKernel,
    pub notes: &'static str,
}

const PERMUTATION_NOTE: &str =
    "representative up to independent block permutations of the two sides; \
     compare through the cut distance, not matrix identity";

fn three_block(ones: [(usize, usize); 3]) -> StepKernel {
    let third = 1.0 / 3.0;
    let mut values = Matrix::zeros(3, 3);
    for (i, j) in ones {
        values.set(i, j, 1.0);
    }
    StepKernel::new(vec![third; 3], vec![third; 3], values).expect("valid block kernel")
}

/// The predicted limit for the classified case: constants for the
/// quasirandom cases, two equal blocks for the square-product case and
/// three equal blocks (the cube classes) for the cube-product cases, with
/// measure-O(1/q) cells omitted from the representative.
pub fn predict_limit(fam: FamilyId, q: u64) -> Result<LimitPrediction> {
    let case_label = classify_case(fam, q)?;
    let representative = match fam {
        FamilyId::PaleySumSquares => {
            if q % 2 == 0 {
                StepKernel::constant(1.0)?
            } else {
                StepKernel::constant(0.5)?
            }
        }
        FamilyId::ProdSquares => {
            if q % 2 == 0 {
                StepKernel::constant(1.0)?
            } else {
                // Squares pair with squares, non-squares with non-squares.
                StepKernel::new(
                    vec![0.5, 0.5],
                    vec![0.5, 0.5],
                    Matrix::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]])?,
                )?
            }
        }
        FamilyId::SumCubes => {
            if (q - 1) % 3 == 0 {
                StepKernel::constant(1.0 / 3.0)?
            } else {
                StepKernel::constant(1.0)?
            }
        }
        FamilyId::ProdCubes => {
            if (q - 1) % 3 == 0 {
                // Cube classes i and j are joined exactly when i + j = 0 mod 3.
                three_block([(0, 0), (1, 2), (2, 1)])
            } else {
                StepKernel::constant(1.0)?
            }
        }
        FamilyId::FrobCubes => {
            if (2 * q + 1) % 3 == 0 {
                three_block([(0, 0), (1, 2), (2, 1)])
            } else {
                StepKernel::constant(1.0)?
            }
        }
        FamilyId::FrobTwistedCubes => {
            let label: &str = &case_label;
            if label.starts_with("case 1") {
                StepKernel::constant(1.0)?
            } else if label.starts_with("case 2") {
                three_block([(0, 0), (1, 2), (2, 1)])
            } else {
                // Exponent classes satisfy a + 2b = 0 mod 3, i.e. a = b.
                three_block([(0, 0), (1, 1), (2, 2)])
            }
        }
    };
    Ok(LimitPrediction {
        case_label,
        representative,
        notes: PERMUTATION_NOTE,
    })
}
