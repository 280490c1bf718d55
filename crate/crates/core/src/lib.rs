//! Card-deal secret exchange over finite vector spaces.
//!
//! A deck of a+b+c cards is identified with the points of F_q^d via a
//! public bijection chosen so that Alice's hand lands on an affine line.
//! Bob answers with a line colouring that is rich and very distinguished,
//! Alice announces her line's colour, and Bob names Cath's cards — while
//! Cath, for each card she does not hold, can still imagine executions
//! placing it in either hand.
//!
//! Field elements are integers 0..q-1 whose little-endian base-p digits
//! are the coefficients of the polynomial representative.

pub mod colouring;
pub mod geometry;
pub mod params;
pub mod protocol;
pub mod verification;

pub use colouring::{
    density, find_critical, full_lines, hue_explore, hue_neighbors, is_distinguished, is_perfect,
    is_rich, is_very_distinguished, knit_colouring, lines_meeting, Colouring, ColouringError,
    Leftover, PointSet, Repr, RichMode, VeryDistinguished, DEFAULT_HUE_CAP,
};
pub use geometry::{sigma, Field, GeometryError, Line, Point, Space, LINE_ENUM_LIMIT};
pub use params::{
    bound_heavy_lines, exact_heavy_bound, feasible, search_k, suggest_params, sweep,
    FeasibilityReport, ParamsError, Regime, SweepRow,
};
pub use protocol::{
    alice_colour, alice_map, bob_colouring, bob_deduce, deal_random, hand_line, non_bob_image,
    prime_power, run_protocol, Deal, ProtocolError, ProtocolParams, Transcript,
};
pub use verification::{
    check_informative, check_weak_safety, one_swap_apart, verify_execution, witness_deal,
    AltDeal, CardSafety, SafetyReport, VerifyError,
};
