//! Block structures, rates, the `delta_bar` ceiling, block variations and
//! the uniqueness-condition checkers.

mod conditions;
mod hellinger;
mod structure;

pub use conditions::{
    check_conditions, classify_series, main_terms, Condition, ConditionVerdict, SeriesClass,
    SeriesProtocol, SeriesReport, Status, DEFAULT_HORIZON,
};
pub use hellinger::{
    block_sup, bound_log, bound_sqrt, bound_w, h_block, pair_from_rho, rho_block,
    validity_report, BlockSup, LevelValidity, RhoRecord, RhoSource, ValidityReport,
    LOGISTIC_BLOCK_DEPTH, LOGISTIC_SIGN_LIMIT, MAX_MARGINAL_CELLS, MAX_PAIR_WORK,
    VALIDITY_TOLERANCE,
};
pub use structure::{
    delta_bar, delta_bar_prefixes, make_blocks, r_from_variations, BlockStrategy,
    BlockStructure, BlockVariationPair, RateSource, DEGENERATE_RATE,
};
