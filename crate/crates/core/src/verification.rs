//! Independent checks of executions: legality of every announcement,
//! informativity, and weak 1-security by explicit construction of
//! alternative deals for every card outside Cath's hand.

use std::collections::{BTreeSet, HashSet};

use serde::Serialize;
use thiserror::Error;

use crate::colouring::{density, find_critical, full_lines, is_perfect, Colouring, Repr};
use crate::geometry::{Line, Space};
use crate::protocol::{hand_line, non_bob_image, Deal, Transcript};

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("malformed transcript: {0}")]
    MalformedTranscript(String),
}

/// An alternative deal witnessing that Cath cannot place a card.
#[derive(Debug, Clone, Serialize)]
pub struct AltDeal {
    /// Alice's hand in the alternative deal.
    pub alt_alice: Vec<u32>,
    /// The image of that hand: a line of the announced colour.
    pub line_points: Vec<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CardSafety {
    pub card: u32,
    /// Alternative execution with the card in Alice's hand.
    pub in_alice: Option<AltDeal>,
    /// Alternative execution with the card in Bob's hand.
    pub in_bob: Option<AltDeal>,
    pub pass: bool,
}

/// Weak 1-security report: both witnesses must exist for every checked card.
#[derive(Debug, Clone, Serialize)]
pub struct SafetyReport {
    pub cards: Vec<CardSafety>,
    pub pass: bool,
}

impl SafetyReport {
    /// Cards for which no alternative execution keeps them out of Alice's
    /// hand, i.e. cards Cath learns Alice holds.
    pub fn leaked_to_alice(&self) -> Vec<u32> {
        self.cards
            .iter()
            .filter(|c| c.in_bob.is_none())
            .map(|c| c.card)
            .collect()
    }
}

fn well_formed(space: &Space, transcript: &Transcript, deal: &Deal) -> Result<(), VerifyError> {
    let n = space.num_points();
    let p = &transcript.params;
    if deal.alice.len() as u64 != p.a || deal.bob.len() as u64 != p.b || deal.cath.len() as u64 != p.c
    {
        return Err(VerifyError::MalformedTranscript(
            "deal sizes do not match the parameters".into(),
        ));
    }
    if deal.deck_size() != n {
        return Err(VerifyError::MalformedTranscript(
            "deck size does not match the space".into(),
        ));
    }
    if transcript.f.len() as u64 != n {
        return Err(VerifyError::MalformedTranscript("f has the wrong length".into()));
    }
    let mut seen = vec![false; n as usize];
    for &img in &transcript.f {
        if img >= n || seen[img as usize] {
            return Err(VerifyError::MalformedTranscript("f is not a bijection".into()));
        }
        seen[img as usize] = true;
    }
    if transcript.claimed_c.len() as u64 != p.c {
        return Err(VerifyError::MalformedTranscript("claimed_C has the wrong size".into()));
    }
    Ok(())
}

/// Was `xi` a legal second announcement for E: rich (density proxy) and
/// very distinguished. Perfection is the fast certificate; a critical
/// witness is the fallback, and either one implies very distinguished.
pub fn legal_colouring(space: &Space, xi: &Colouring, e: &crate::colouring::PointSet, c: u64) -> bool {
    if density(space, xi) < c + 2 {
        return false;
    }
    is_perfect(space, xi, e) || find_critical(space, xi, e).is_some()
}

/// True iff each announcement was legal for its announcer given the deal:
/// f a bijection with f(A) a line, xi rich and very distinguished for
/// f(A u C), colour = xi(f(A)), claimed_C = C.
pub fn verify_execution(
    space: &Space,
    transcript: &Transcript,
    deal: &Deal,
) -> Result<bool, VerifyError> {
    well_formed(space, transcript, deal)?;
    let hand = match hand_line(&transcript.f, &deal.alice, space) {
        Ok(l) => l,
        Err(_) => return Ok(false),
    };
    let e = non_bob_image(&transcript.f, &deal.bob);
    if !legal_colouring(space, &transcript.xi, &e, transcript.params.c) {
        return Ok(false);
    }
    if transcript.xi.colour_of(space, &hand) != transcript.colour {
        return Ok(false);
    }
    let claimed: BTreeSet<u32> = transcript.claimed_c.iter().copied().collect();
    Ok(claimed == deal.cath)
}

/// Informativity: exactly one full line of the announced colour inside
/// f(A u C), and the claimed C is structurally D \ A \ B.
pub fn check_informative(space: &Space, transcript: &Transcript, deal: &Deal) -> bool {
    let e = non_bob_image(&transcript.f, &deal.bob);
    let matching = full_lines(space, &e)
        .into_iter()
        .filter(|l| transcript.xi.colour_of(space, l) == transcript.colour)
        .count();
    if matching != 1 {
        return false;
    }
    let expected: Vec<u32> = (1..=space.num_points() as u32)
        .filter(|c| !deal.alice.contains(c) && !deal.bob.contains(c))
        .collect();
    transcript.claimed_c == expected
}

/// First line of the given colour, disjoint from `forbidden`, accepted by
/// `accept`. Streams candidates direction class by direction class without
/// materializing the space's line set; exception lines are tried last.
fn find_coloured_line(
    space: &Space,
    xi: &Colouring,
    colour: u32,
    forbidden: &HashSet<u64>,
    mut accept: impl FnMut(&Line) -> bool,
) -> Option<Line> {
    let avoids = |l: &Line| l.points.iter().all(|p| !forbidden.contains(p));
    match &xi.repr {
        Repr::Dense(_) => space
            .all_lines()
            .iter()
            .find(|l| xi.colour_of(space, l) == colour && avoids(l) && accept(l))
            .cloned(),
        Repr::Compact {
            by_direction,
            exceptions,
            ..
        } => {
            let exception_keys: HashSet<(u64, u64)> =
                exceptions.iter().map(|(l, _)| l.key()).collect();
            for (rank, dir) in space.directions().iter().enumerate() {
                if by_direction[rank] != colour {
                    continue;
                }
                // cosets hit by the forbidden set, by canonical base index
                let blocked: HashSet<u64> = forbidden
                    .iter()
                    .map(|&p| space.line(&space.point(p), dir).base.index)
                    .collect();
                let mut seen: HashSet<u64> = HashSet::new();
                for idx in 0..space.num_points() {
                    if seen.contains(&idx) {
                        continue;
                    }
                    let line = space.line(&space.point(idx), dir);
                    seen.extend(line.points.iter().copied());
                    if blocked.contains(&line.base.index)
                        || exception_keys.contains(&line.key())
                    {
                        continue;
                    }
                    if accept(&line) {
                        return Some(line);
                    }
                }
            }
            exceptions
                .iter()
                .find(|(l, c)| *c == colour && avoids(l) && accept(l))
                .map(|(l, _)| l.clone())
        }
    }
}

/// Is F one swap from E under xi: F = (E \ l) u h for some full line l of E
/// and same-coloured h disjoint from E \ l.
pub fn one_swap_apart(
    space: &Space,
    xi: &Colouring,
    e: &crate::colouring::PointSet,
    f: &crate::colouring::PointSet,
) -> bool {
    for l in full_lines(space, e) {
        let colour = xi.colour_of(space, &l);
        let rest: crate::colouring::PointSet =
            e.iter().copied().filter(|p| !l.contains(*p)).collect();
        // the swapped-in line must be exactly F \ rest
        if !rest.is_subset(f) {
            continue;
        }
        let added: Vec<u64> = f.iter().copied().filter(|p| !rest.contains(p)).collect();
        if added.len() as u64 != space.q() {
            continue;
        }
        let h = match space.line_from_points(&space.point(added[0]), &space.point(added[1])) {
            Ok(h) => h,
            Err(_) => continue,
        };
        if added.iter().all(|&p| h.contains(p))
            && xi.colour_of(space, &h) == colour
            && h.points.iter().all(|p| !rest.contains(p))
        {
            return true;
        }
    }
    false
}

/// Validate one candidate alternative line: same hue as the true E (one
/// swap) and still critical, hence still a legal colouring target.
fn candidate_is_execution(
    space: &Space,
    transcript: &Transcript,
    e_true: &crate::colouring::PointSet,
    cath_image: &BTreeSet<u64>,
    candidate: &Line,
) -> bool {
    let mut alt_e: crate::colouring::PointSet = cath_image.iter().copied().collect();
    alt_e.extend(candidate.points.iter().copied());
    one_swap_apart(space, &transcript.xi, e_true, &alt_e)
        && find_critical(space, &transcript.xi, &alt_e).is_some()
}

fn alt_deal(_space: &Space, transcript: &Transcript, line: &Line) -> AltDeal {
    let inverse: std::collections::HashMap<u64, u32> = transcript
        .f
        .iter()
        .enumerate()
        .map(|(i, &p)| (p, i as u32 + 1))
        .collect();
    let mut alt_alice: Vec<u32> = line.points.iter().map(|p| inverse[p]).collect();
    alt_alice.sort_unstable();
    AltDeal {
        alt_alice,
        line_points: line.points.clone(),
    }
}

/// Weak 1-security: for every card x outside Cath's hand (or a sampled
/// subset), construct an alternative execution placing x in Alice's hand
/// and one placing x in Bob's hand. Witnesses are built from the transcript
/// and C; the true deal is consulted only to locate the actual execution.
pub fn check_weak_safety(
    space: &Space,
    transcript: &Transcript,
    deal: &Deal,
    sample: Option<&[u32]>,
) -> SafetyReport {
    let e_true = non_bob_image(&transcript.f, &deal.bob);
    let cath_image: BTreeSet<u64> = deal
        .cath
        .iter()
        .map(|&c| transcript.f[c as usize - 1])
        .collect();
    let cath_forbidden: HashSet<u64> = cath_image.iter().copied().collect();

    let cards: Vec<u32> = match sample {
        Some(s) => s.iter().copied().filter(|c| !deal.cath.contains(c)).collect(),
        None => (1..=space.num_points() as u32)
            .filter(|c| !deal.cath.contains(c))
            .collect(),
    };

    let mut report = SafetyReport {
        cards: Vec::with_capacity(cards.len()),
        pass: true,
    };
    for card in cards {
        let fx = transcript.f[card as usize - 1];

        // witness with x in Alice's hand: a colour-n line through f(x)
        // avoiding f(C)
        let mut in_alice = None;
        for l in space.lines_through(&space.point(fx)) {
            if transcript.xi.colour_of(space, &l) != transcript.colour {
                continue;
            }
            if l.points.iter().any(|p| cath_forbidden.contains(p)) {
                continue;
            }
            if candidate_is_execution(space, transcript, &e_true, &cath_image, &l) {
                in_alice = Some(alt_deal(space, transcript, &l));
                break;
            }
        }

        // witness with x in Bob's hand: a colour-n line avoiding f(C) and f(x)
        let mut forbidden = cath_forbidden.clone();
        forbidden.insert(fx);
        let in_bob = find_coloured_line(space, &transcript.xi, transcript.colour, &forbidden, |h| {
            candidate_is_execution(space, transcript, &e_true, &cath_image, h)
        })
        .map(|h| alt_deal(space, transcript, &h));

        let pass = in_alice.is_some() && in_bob.is_some();
        report.pass &= pass;
        report.cards.push(CardSafety {
            card,
            in_alice,
            in_bob,
            pass,
        });
    }
    report
}

/// Build the alternative deal a safety witness names: Alice takes the
/// witness line, Cath keeps C, Bob takes the rest.
pub fn witness_deal(deck_size: u64, witness: &AltDeal, cath: &BTreeSet<u32>) -> Deal {
    let alice: BTreeSet<u32> = witness.alt_alice.iter().copied().collect();
    let bob: BTreeSet<u32> = (1..=deck_size as u32)
        .filter(|c| !alice.contains(c) && !cath.contains(c))
        .collect();
    Deal {
        alice,
        bob,
        cath: cath.clone(),
    }
}
