//! Locally adaptive two- and higher-dimensional spline bases.

mod hierarchical;
mod tmesh;

pub use hierarchical::{
    BoxRegion, HierarchicalBasis, HierarchicalJson, HierarchicalLevelJson, HierarchicalModel, LevelRegion,
};
pub use tmesh::{TMesh, TMeshBasisFunction, TMeshJson, TMeshModel};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Numerical-rank summary of a basis-evaluation matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub basis_count: usize,
    pub grid_points: usize,
    pub rank: usize,
    pub rank_deficient: bool,
    /// Singular values, largest first.
    pub singular_values: Vec<f64>,
    pub tolerance: f64,
}

/// Rank of `rows × cols` evaluation matrix with the usual
/// `max(rows, cols) · ε · σ_max` cut-off.
pub fn rank_report(eval: &DMatrix<f64>) -> RankReport {
    let mut sv: Vec<f64> = eval.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let smax = sv.first().copied().unwrap_or(0.0);
    let tol = eval.nrows().max(eval.ncols()) as f64 * f64::EPSILON * smax;
    let rank = sv.iter().filter(|&&s| s > tol).count();
    RankReport {
        basis_count: eval.ncols(),
        grid_points: eval.nrows(),
        rank,
        rank_deficient: rank < eval.ncols(),
        singular_values: sv,
        tolerance: tol,
    }
}
