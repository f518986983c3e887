//! Sylvester equations: Zolotarev shifts, matrix fADI, Kronecker shifted
//! solves, low-rank recompression and the TT-fADI solver for 3D tensor
//! equations.

mod fadi;
mod operator;
mod shifts;
mod tt_fadi;

pub use fadi::{fadi_matrix, lowrank_recompress, recompress_cost, LowRank};
pub use operator::{kron_shifted_solve, kron_solve_cost, NormalOperator};
pub use shifts::{
    interval_grid, jacobi_dn, mobius_gamma, rational_ratio, shift_count, zolotarev_bound, zolotarev_shifts,
    zolotarev_shifts_with_count, Interval, ShiftParameters,
};
pub use tt_fadi::{
    demo_problem, direct_diag_solve, direct_solve, tt_fadi, tt_fadi_with_shifts, FadiSolution, FadiStats,
    Sylvester3DProblem,
};
