//! The four-step colouring protocol as an executable state machine:
//! Alice maps the deck onto F_a^d with her hand on a line, Bob announces a
//! knit colouring that is perfect for the deck minus his hand, Alice
//! announces her hand's colour, Bob deduces Cath's cards.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use thiserror::Error;

use crate::colouring::{
    colouring_from_json, colouring_to_json, full_lines, knit_colouring, lines_meeting, Colouring,
    ColouringError, Leftover, PointSet,
};
use crate::geometry::{Field, GeometryError, Line, Space};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("hand size does not match the field order")]
    SizeMismatch,
    #[error("the announced hand is not a line")]
    NotALine,
    #[error("executability violated: {found} lines meet the non-Bob cards in >= a-k points, but only {k} colours")]
    TooManyHeavyLines { found: usize, k: u32 },
    #[error("no full line of the announced colour")]
    NoMatchingLine,
    #[error("{0} full lines of the announced colour: colouring not distinguished")]
    AmbiguousLine(usize),
    #[error(transparent)]
    Colouring(#[from] ColouringError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("malformed transcript: {0}")]
    Malformed(String),
}

/// Factor a prime power; `None` if `a` is not one.
pub fn prime_power(a: u64) -> Option<(u64, u32)> {
    if a < 2 {
        return None;
    }
    let mut p = 2;
    while p * p <= a {
        if a % p == 0 {
            let mut n = 0;
            let mut rest = a;
            while rest % p == 0 {
                rest /= p;
                n += 1;
            }
            return if rest == 1 { Some((p, n)) } else { None };
        }
        p += 1;
    }
    Some((a, 1)) // prime
}

/// A partition (A, B, C) of the deck {1..a+b+c}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Deal {
    pub alice: BTreeSet<u32>,
    pub bob: BTreeSet<u32>,
    pub cath: BTreeSet<u32>,
}

impl Deal {
    pub fn deck_size(&self) -> u64 {
        (self.alice.len() + self.bob.len() + self.cath.len()) as u64
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "A": self.alice.iter().collect::<Vec<_>>(),
            "B": self.bob.iter().collect::<Vec<_>>(),
            "C": self.cath.iter().collect::<Vec<_>>(),
        })
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Deal, ProtocolError> {
        let get = |key: &str| -> Result<BTreeSet<u32>, ProtocolError> {
            value
                .get(key)
                .and_then(|v| v.as_array())
                .ok_or_else(|| ProtocolError::Malformed(format!("deal missing {key}")))?
                .iter()
                .map(|v| {
                    v.as_u64()
                        .map(|x| x as u32)
                        .ok_or_else(|| ProtocolError::Malformed("card ids must be integers".into()))
                })
                .collect()
        };
        let deal = Deal {
            alice: get("A")?,
            bob: get("B")?,
            cath: get("C")?,
        };
        let n = deal.deck_size();
        let mut union = deal.alice.clone();
        union.extend(&deal.bob);
        union.extend(&deal.cath);
        if union.len() as u64 != n || union.iter().min().is_some_and(|&m| m != 1)
            || union.iter().max().is_some_and(|&m| m as u64 != n)
        {
            return Err(ProtocolError::Malformed(
                "A, B, C must partition {1..a+b+c}".into(),
            ));
        }
        Ok(deal)
    }
}

/// Validated protocol parameters: a is a prime power, a+b+c = a^d, 1 <= k < a.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolParams {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u32,
    pub k: u32,
    pub field: Field,
}

impl ProtocolParams {
    pub fn new(
        a: u64,
        b: u64,
        c: u64,
        d: u32,
        k: u32,
        modulus: Option<Vec<u32>>,
    ) -> Result<ProtocolParams, ProtocolError> {
        let (p, n) =
            prime_power(a).ok_or_else(|| ProtocolError::InvalidParams(format!("a = {a} is not a prime power")))?;
        if d < 2 {
            return Err(ProtocolError::InvalidParams("d must be >= 2".into()));
        }
        if a + b + c != a.pow(d) {
            return Err(ProtocolError::InvalidParams(format!(
                "a+b+c = {} but a^d = {}",
                a + b + c,
                a.pow(d)
            )));
        }
        if k == 0 || k as u64 >= a {
            return Err(ProtocolError::InvalidParams("k must satisfy 1 <= k < a".into()));
        }
        let field = Field::new(p, n, modulus)?;
        Ok(ProtocolParams { a, b, c, d, k, field })
    }

    pub fn deck_size(&self) -> u64 {
        self.a + self.b + self.c
    }

    pub fn space(&self) -> Space {
        Space::new(self.field.clone(), self.d)
    }
}

/// The four-announcement execution record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transcript {
    pub params: ProtocolParams,
    pub seed: u64,
    /// Bijection card id -> point index; f[i-1] is the image of card i.
    pub f: Vec<u64>,
    pub xi: Colouring,
    pub colour: u32,
    pub claimed_c: Vec<u32>,
}

impl Transcript {
    pub fn to_json(&self, space: &Space) -> serde_json::Value {
        json!({
            "params": {
                "a": self.params.a,
                "b": self.params.b,
                "c": self.params.c,
                "d": self.params.d,
                "k": self.params.k,
                "modulus": self.params.field.modulus(),
            },
            "seed": self.seed,
            "f": self.f,
            "xi": colouring_to_json(space, &self.xi),
            "colour": self.colour,
            "claimed_C": self.claimed_c,
        })
    }

    pub fn from_json(value: &serde_json::Value) -> Result<(Transcript, Space), ProtocolError> {
        let bad = |m: &str| ProtocolError::Malformed(m.to_string());
        let params = value.get("params").ok_or_else(|| bad("missing params"))?;
        let int = |p: &serde_json::Value, key: &str| -> Result<u64, ProtocolError> {
            p.get(key)
                .and_then(|v| v.as_u64())
                .ok_or_else(|| bad(&format!("missing integer {key}")))
        };
        let modulus: Option<Vec<u32>> = match params.get("modulus") {
            None => None,
            Some(v) => {
                let arr = v.as_array().ok_or_else(|| bad("modulus must be an array"))?;
                if arr.is_empty() {
                    None
                } else {
                    Some(
                        arr.iter()
                            .map(|c| c.as_u64().map(|x| x as u32).ok_or_else(|| bad("bad modulus coefficient")))
                            .collect::<Result<_, _>>()?,
                    )
                }
            }
        };
        let p = ProtocolParams::new(
            int(params, "a")?,
            int(params, "b")?,
            int(params, "c")?,
            int(params, "d")? as u32,
            int(params, "k")? as u32,
            modulus,
        )
        .map_err(|e| bad(&format!("bad params: {e}")))?;
        let space = p.space();
        let seed = int(value, "seed")?;
        let f: Vec<u64> = value
            .get("f")
            .and_then(|v| v.as_array())
            .ok_or_else(|| bad("missing f"))?
            .iter()
            .map(|v| v.as_u64().ok_or_else(|| bad("f entries must be integers")))
            .collect::<Result<_, _>>()?;
        let xi = colouring_from_json(&space, p.k, value.get("xi").ok_or_else(|| bad("missing xi"))?)
            .map_err(|e| bad(&format!("bad xi: {e}")))?;
        let colour = int(value, "colour")? as u32;
        if colour < 1 || colour > p.k {
            return Err(bad("colour out of range"));
        }
        let claimed_c: Vec<u32> = value
            .get("claimed_C")
            .and_then(|v| v.as_array())
            .ok_or_else(|| bad("missing claimed_C"))?
            .iter()
            .map(|v| v.as_u64().map(|x| x as u32).ok_or_else(|| bad("claimed_C entries must be integers")))
            .collect::<Result<_, _>>()?;
        let t = Transcript {
            params: p,
            seed,
            f,
            xi,
            colour,
            claimed_c,
        };
        Ok((t, space))
    }
}

/// Uniformly random partition of {1..a+b+c} into hands of sizes (a, b, c).
pub fn deal_random<R: Rng>(a: u64, b: u64, c: u64, rng: &mut R) -> Deal {
    let mut cards: Vec<u32> = (1..=(a + b + c) as u32).collect();
    cards.shuffle(rng);
    Deal {
        alice: cards[..a as usize].iter().copied().collect(),
        bob: cards[a as usize..(a + b) as usize].iter().copied().collect(),
        cath: cards[(a + b) as usize..].iter().copied().collect(),
    }
}

/// Step 1: a random bijection from the deck to the points of F_a^d mapping
/// Alice's hand onto a line. Samples a uniform line, a uniform bijection of
/// the hand onto it, and a uniform bijection of the rest.
pub fn alice_map<R: Rng>(
    alice: &BTreeSet<u32>,
    space: &Space,
    rng: &mut R,
) -> Result<Vec<u64>, ProtocolError> {
    if alice.len() as u64 != space.q() {
        return Err(ProtocolError::SizeMismatch);
    }
    let n = space.num_points();
    let dir = space.directions()[rng.random_range(0..space.num_directions()) as usize].clone();
    let base = space.point(rng.random_range(0..n));
    let line = space.line(&base, &dir);

    let mut hand: Vec<u32> = alice.iter().copied().collect();
    hand.shuffle(rng);
    let mut rest: Vec<u32> = (1..=n as u32).filter(|c| !alice.contains(c)).collect();
    rest.shuffle(rng);
    let on_line: std::collections::HashSet<u64> = line.points.iter().copied().collect();
    let mut free_points = (0..n).filter(|p| !on_line.contains(p));

    let mut f = vec![0u64; n as usize];
    for (card, point) in hand.iter().zip(&line.points) {
        f[*card as usize - 1] = *point;
    }
    for card in rest {
        f[card as usize - 1] = free_points.next().expect("point counts match");
    }
    Ok(f)
}

/// Image of the deck minus Bob's hand: E = f(D \ B).
pub fn non_bob_image(f: &[u64], bob: &BTreeSet<u32>) -> PointSet {
    f.iter()
        .enumerate()
        .filter(|(i, _)| !bob.contains(&(*i as u32 + 1)))
        .map(|(_, &p)| p)
        .collect()
}

/// Step 2: Bob's colouring. Enumerates the lines meeting E = f(D \ B) in at
/// least a-k points, pins them to distinct colours via the knit
/// construction at density c+2. Reads only Bob's hand and the prior
/// announcement.
pub fn bob_colouring<R: Rng>(
    f: &[u64],
    bob: &BTreeSet<u32>,
    params: &ProtocolParams,
    space: &Space,
    rng: &mut R,
    leftover: Leftover,
) -> Result<(Colouring, Vec<Line>), ProtocolError> {
    let e = non_bob_image(f, bob);
    let special = lines_meeting(space, &e, params.a - params.k as u64);
    if special.len() > params.k as usize {
        return Err(ProtocolError::TooManyHeavyLines {
            found: special.len(),
            k: params.k,
        });
    }
    let xi = knit_colouring(space, &special, params.k, params.c + 2, rng, leftover)?;
    Ok((xi, special))
}

/// The line formed by Alice's hand under f, if it is one.
pub fn hand_line(f: &[u64], alice: &BTreeSet<u32>, space: &Space) -> Result<Line, ProtocolError> {
    let images: Vec<u64> = alice.iter().map(|&c| f[c as usize - 1]).collect();
    if images.len() as u64 != space.q() {
        return Err(ProtocolError::SizeMismatch);
    }
    let line = space
        .line_from_points(&space.point(images[0]), &space.point(images[1]))
        .map_err(|_| ProtocolError::NotALine)?;
    if images.iter().all(|&p| line.contains(p)) {
        Ok(line)
    } else {
        Err(ProtocolError::NotALine)
    }
}

/// Step 3: Alice announces the colour of her hand.
pub fn alice_colour(
    f: &[u64],
    xi: &Colouring,
    alice: &BTreeSet<u32>,
    space: &Space,
) -> Result<u32, ProtocolError> {
    Ok(xi.colour_of(space, &hand_line(f, alice, space)?))
}

/// Step 4: Bob finds the unique full line of the announced colour inside
/// f(D \ B) and announces the remaining non-Bob cards as Cath's.
pub fn bob_deduce(
    f: &[u64],
    xi: &Colouring,
    colour: u32,
    bob: &BTreeSet<u32>,
    space: &Space,
) -> Result<BTreeSet<u32>, ProtocolError> {
    let e = non_bob_image(f, bob);
    let matching: Vec<Line> = full_lines(space, &e)
        .into_iter()
        .filter(|l| xi.colour_of(space, l) == colour)
        .collect();
    match matching.len() {
        0 => Err(ProtocolError::NoMatchingLine),
        1 => {
            let line = &matching[0];
            Ok(f.iter()
                .enumerate()
                .map(|(i, &p)| (i as u32 + 1, p))
                .filter(|(card, p)| !bob.contains(card) && !line.contains(*p))
                .map(|(card, _)| card)
                .collect())
        }
        n => Err(ProtocolError::AmbiguousLine(n)),
    }
}

/// Run all four steps under a seeded RNG; identical (deal, params, seed)
/// yields an identical transcript.
pub fn run_protocol(
    deal: &Deal,
    params: &ProtocolParams,
    space: &Space,
    seed: u64,
    leftover: Leftover,
) -> Result<Transcript, ProtocolError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = alice_map(&deal.alice, space, &mut rng)?;
    let (xi, _special) = bob_colouring(&f, &deal.bob, params, space, &mut rng, leftover)?;
    let colour = alice_colour(&f, &xi, &deal.alice, space)?;
    let claimed = bob_deduce(&f, &xi, colour, &deal.bob, space)?;
    Ok(Transcript {
        params: params.clone(),
        seed,
        f,
        xi,
        colour,
        claimed_c: claimed.into_iter().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::colouring::{density, is_perfect, Colouring};

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn params_7_41_1() -> ProtocolParams {
        ProtocolParams::new(7, 41, 1, 2, 2, None).unwrap()
    }

    #[test]
    fn prime_power_detection() {
        assert_eq!(prime_power(7), Some((7, 1)));
        assert_eq!(prime_power(49), Some((7, 2)));
        assert_eq!(prime_power(8), Some((2, 3)));
        assert_eq!(prime_power(12), None);
        assert_eq!(prime_power(1), None);
    }

    #[test]
    fn deal_random_sizes_and_reproducibility() {
        let d1 = deal_random(3, 3, 1, &mut rng(42));
        assert_eq!(d1.alice.len(), 3);
        assert_eq!(d1.bob.len(), 3);
        assert_eq!(d1.cath.len(), 1);
        let d2 = deal_random(7, 41, 1, &mut rng(9));
        let d3 = deal_random(7, 41, 1, &mut rng(9));
        assert_eq!(d2, d3);
        let forced = deal_random(1, 0, 0, &mut rng(0));
        assert_eq!(forced.alice, BTreeSet::from([1]));
        assert!(forced.bob.is_empty() && forced.cath.is_empty());
    }

    #[test]
    fn alice_map_hand_is_a_line() {
        let params = params_7_41_1();
        let space = params.space();
        for seed in 0..20 {
            let deal = deal_random(7, 41, 1, &mut rng(seed));
            let f = alice_map(&deal.alice, &space, &mut rng(seed + 100)).unwrap();
            // bijection
            let mut sorted = f.clone();
            sorted.sort_unstable();
            assert_eq!(sorted, (0..49).collect::<Vec<u64>>());
            hand_line(&f, &deal.alice, &space).unwrap();
        }
    }

    #[test]
    fn alice_map_over_gf2() {
        // every pair of points is a line over GF(2)
        let params = ProtocolParams::new(2, 1, 1, 2, 1, None).unwrap();
        let space = params.space();
        let deal = Deal {
            alice: BTreeSet::from([2, 4]),
            bob: BTreeSet::from([1]),
            cath: BTreeSet::from([3]),
        };
        let f = alice_map(&deal.alice, &space, &mut rng(0)).unwrap();
        hand_line(&f, &deal.alice, &space).unwrap();
    }

    #[test]
    fn alice_map_size_mismatch() {
        let params = params_7_41_1();
        let space = params.space();
        let err = alice_map(&BTreeSet::from([1, 2, 3]), &space, &mut rng(0)).unwrap_err();
        assert!(matches!(err, ProtocolError::SizeMismatch));
    }

    #[test]
    fn bob_colouring_is_perfect_and_dense() {
        let params = params_7_41_1();
        let space = params.space();
        for seed in 0..10 {
            let deal = deal_random(7, 41, 1, &mut rng(seed));
            let f = alice_map(&deal.alice, &space, &mut rng(seed)).unwrap();
            let (xi, special) = bob_colouring(
                &f,
                &deal.bob,
                &params,
                &space,
                &mut rng(seed),
                Leftover::Deterministic,
            )
            .unwrap();
            let e = non_bob_image(&f, &deal.bob);
            assert!(is_perfect(&space, &xi, &e));
            assert!(density(&space, &xi) >= params.c + 2);
            // Alice's line is always among the pinned lines
            let hand = hand_line(&f, &deal.alice, &space).unwrap();
            assert!(special.contains(&hand));
        }
    }

    #[test]
    fn bob_colouring_hand_only_dependence() {
        // same (f, B, seed), different splits of D \ B into (A, C):
        // identical colouring
        let params = params_7_41_1();
        let space = params.space();
        let deal = deal_random(7, 41, 1, &mut rng(5));
        let f = alice_map(&deal.alice, &space, &mut rng(5)).unwrap();
        let out1 = bob_colouring(&f, &deal.bob, &params, &space, &mut rng(77), Leftover::Randomized)
            .unwrap();
        // the split of D \ B is not even an input; call again to confirm determinism
        let out2 = bob_colouring(&f, &deal.bob, &params, &space, &mut rng(77), Leftover::Randomized)
            .unwrap();
        assert_eq!(out1.0, out2.0);
    }

    #[test]
    fn infeasible_toy_raises_too_many_heavy_lines() {
        // a=3, d=2, k=1, c=1: E = f(A) plus one extra point always has
        // heavy lines through the extra point
        let params = ProtocolParams::new(3, 5, 1, 2, 1, None).unwrap();
        let space = params.space();
        let deal = deal_random(3, 5, 1, &mut rng(1));
        let f = alice_map(&deal.alice, &space, &mut rng(1)).unwrap();
        let err = bob_colouring(&f, &deal.bob, &params, &space, &mut rng(1), Leftover::Deterministic)
            .unwrap_err();
        assert!(matches!(err, ProtocolError::TooManyHeavyLines { .. }));
    }

    #[test]
    fn alice_colour_matches_pinned_special() {
        let params = params_7_41_1();
        let space = params.space();
        let deal = deal_random(7, 41, 1, &mut rng(3));
        let f = alice_map(&deal.alice, &space, &mut rng(3)).unwrap();
        let (xi, special) =
            bob_colouring(&f, &deal.bob, &params, &space, &mut rng(3), Leftover::Deterministic)
                .unwrap();
        let colour = alice_colour(&f, &xi, &deal.alice, &space).unwrap();
        let hand = hand_line(&f, &deal.alice, &space).unwrap();
        let pos = special.iter().position(|l| *l == hand).unwrap();
        assert_eq!(colour, pos as u32 + 1);
    }

    #[test]
    fn bob_deduce_recovers_cath() {
        let params = params_7_41_1();
        let space = params.space();
        for seed in 0..25 {
            let deal = deal_random(7, 41, 1, &mut rng(seed));
            let t = run_protocol(&deal, &params, &space, seed, Leftover::Deterministic).unwrap();
            assert_eq!(
                t.claimed_c,
                deal.cath.iter().copied().collect::<Vec<u32>>()
            );
        }
    }

    #[test]
    fn bob_deduce_wrong_colour_no_match() {
        let params = params_7_41_1();
        let space = params.space();
        let deal = deal_random(7, 41, 1, &mut rng(2));
        let t = run_protocol(&deal, &params, &space, 2, Leftover::Deterministic).unwrap();
        let wrong = if t.colour == 1 { 2 } else { 1 };
        let err = bob_deduce(&t.f, &t.xi, wrong, &deal.bob, &space).unwrap_err();
        assert!(matches!(err, ProtocolError::NoMatchingLine));
    }

    #[test]
    fn bob_deduce_ambiguous_on_degenerate_colouring() {
        // E = {00,01,02,12,22} holds two full lines; a 1-colouring makes
        // Bob's deduction ambiguous
        let params = ProtocolParams::new(3, 4, 2, 2, 2, None).unwrap();
        let space = params.space();
        let f: Vec<u64> = (0..9).collect(); // card i -> point i-1
        let coords = |i: u64, j: u64| space.point_from_coords(&[i, j]).index;
        let alice: BTreeSet<u32> = [coords(0, 0), coords(0, 1), coords(0, 2)]
            .iter()
            .map(|&p| p as u32 + 1)
            .collect();
        let cath: BTreeSet<u32> = [coords(1, 2), coords(2, 2)]
            .iter()
            .map(|&p| p as u32 + 1)
            .collect();
        let bob: BTreeSet<u32> = (1..=9u32).filter(|c| !alice.contains(c) && !cath.contains(c)).collect();
        let xi = Colouring {
            k: 2,
            repr: crate::colouring::Repr::Compact {
                by_direction: vec![1; 4],
                exceptions: vec![],
                default: 1,
            },
        };
        let err = bob_deduce(&f, &xi, 1, &bob, &space).unwrap_err();
        assert!(matches!(err, ProtocolError::AmbiguousLine(2)));
    }

    #[test]
    fn run_protocol_deterministic_under_seed() {
        let params = params_7_41_1();
        let space = params.space();
        let deal = deal_random(7, 41, 1, &mut rng(11));
        let t1 = run_protocol(&deal, &params, &space, 99, Leftover::Randomized).unwrap();
        let t2 = run_protocol(&deal, &params, &space, 99, Leftover::Randomized).unwrap();
        assert_eq!(t1, t2);
        assert_eq!(t1.to_json(&space).to_string(), t2.to_json(&space).to_string());
    }

    #[test]
    fn run_protocol_degenerate_c_zero() {
        let params = ProtocolParams::new(7, 42, 0, 2, 2, None).unwrap();
        let space = params.space();
        let deal = deal_random(7, 42, 0, &mut rng(4));
        let t = run_protocol(&deal, &params, &space, 4, Leftover::Deterministic).unwrap();
        assert!(t.claimed_c.is_empty());
    }

    #[test]
    fn transcript_json_roundtrip() {
        let params = params_7_41_1();
        let space = params.space();
        let deal = deal_random(7, 41, 1, &mut rng(13));
        let t = run_protocol(&deal, &params, &space, 13, Leftover::Randomized).unwrap();
        let v = t.to_json(&space);
        let (back, _space2) = Transcript::from_json(&v).unwrap();
        assert_eq!(t, back);
        // round-trip consistency: claimed-A maps onto the unique colour-n line
        let claimed_a: BTreeSet<u32> = (1..=49u32)
            .filter(|c| !deal.bob.contains(c) && !t.claimed_c.contains(c))
            .collect();
        let line = hand_line(&t.f, &claimed_a, &space).unwrap();
        assert_eq!(t.xi.colour_of(&space, &line), t.colour);
    }

    #[test]
    fn deal_json_roundtrip_and_validation() {
        let deal = deal_random(3, 3, 1, &mut rng(8));
        let v = deal.to_json();
        assert_eq!(Deal::from_json(&v).unwrap(), deal);
        let bad = serde_json::json!({"A": [1, 2], "B": [2], "C": [3]});
        assert!(Deal::from_json(&bad).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(ProtocolParams::new(6, 28, 2, 2, 2, None).is_err()); // not a prime power
        assert!(ProtocolParams::new(7, 40, 1, 2, 2, None).is_err()); // a+b+c != a^d
        assert!(ProtocolParams::new(7, 41, 1, 2, 7, None).is_err()); // k >= a
    }
}
