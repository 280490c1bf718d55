//! End-to-end acceptance suite. Each criterion prints a single
//! "criterion N (...): pass|FAIL" line (visible with --nocapture).

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rcards::{
    bound_heavy_lines, check_informative, check_weak_safety, deal_random, density, feasible,
    find_critical, hue_neighbors, is_distinguished, is_perfect,
    is_very_distinguished, knit_colouring, lines_meeting, run_protocol, search_k, sigma,
    verify_execution, witness_deal, Colouring, Field, Leftover, PointSet, ProtocolParams, Space,
    VeryDistinguished,
};

fn space(q: u64, d: u32) -> Space {
    let (p, n) = match q {
        4 => (2, 2),
        8 => (2, 3),
        9 => (3, 2),
        49 => (7, 2),
        _ => (q, 1),
    };
    Space::new(Field::new(p, n, None).unwrap(), d)
}

fn criterion<F: FnOnce()>(n: u32, label: &str, body: F) {
    let result = catch_unwind(AssertUnwindSafe(body));
    match &result {
        Ok(()) => println!("criterion {n} ({label}): pass"),
        Err(_) => println!("criterion {n} ({label}): FAIL"),
    }
    if result.is_err() {
        panic!("criterion {n} ({label}) failed");
    }
}

#[test]
fn criterion_01_geometry_counts() {
    criterion(1, "geometry counts", || {
        for (q, d) in [(2, 2), (3, 2), (3, 3), (4, 2), (5, 2), (7, 2), (7, 3u32), (8, 2), (9, 2)] {
            let s = space(q, d);
            let sigma_dq = sigma(d, q);
            assert_eq!(s.all_lines().len() as u64, sigma_dq * q.pow(d - 1), "q={q} d={d}");
            for p in s.points() {
                let through = s.lines_through(&p);
                assert_eq!(through.len() as u64, sigma_dq, "q={q} d={d} point {}", p.index);
                for l in &through {
                    assert!(l.contains(p.index));
                }
            }
        }
    });
}

#[test]
fn criterion_02_figure_example() {
    criterion(2, "figure-1 heavy lines", || {
        let s = space(3, 2);
        let pt = |i: u64, j: u64| s.point_from_coords(&[i, j]).index;
        let e: PointSet = [pt(0, 0), pt(0, 1), pt(0, 2), pt(1, 2), pt(2, 2)].into_iter().collect();
        let heavy = lines_meeting(&s, &e, 3);
        let sets: BTreeSet<Vec<u64>> = heavy.iter().map(|l| l.points.clone()).collect();
        let mut l1 = vec![pt(0, 0), pt(0, 1), pt(0, 2)];
        let mut l2 = vec![pt(0, 2), pt(1, 2), pt(2, 2)];
        l1.sort_unstable();
        l2.sort_unstable();
        assert_eq!(sets, [l1, l2].into_iter().collect());
    });
}

#[test]
fn criterion_03_knit_construction() {
    criterion(3, "knit construction", || {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (q, d) in [(3, 2), (5, 2), (7, 2), (7, 3u32), (4, 2)] {
            let s = space(q, d);
            let dirs = s.num_directions();
            for _ in 0..200 {
                let k_max = 3.min(dirs / 2) as u32; // keep sigma_d(q) >= k(m+1) satisfiable
                let k = rng.random_range(1..=k_max);
                let m_max = dirs / k as u64 - 1;
                let m = rng.random_range(1..=m_max);
                let n = rng.random_range(0..=k) as usize;
                // n distinct special lines
                let mut special = Vec::new();
                let mut keys = BTreeSet::new();
                while special.len() < n {
                    let i = rng.random_range(0..s.num_points());
                    let mut j = rng.random_range(0..s.num_points());
                    while j == i {
                        j = rng.random_range(0..s.num_points());
                    }
                    let l = s.line_from_points(&s.point(i), &s.point(j)).unwrap();
                    if keys.insert(l.key()) {
                        special.push(l);
                    }
                }
                let xi = knit_colouring(&s, &special, k, m, &mut rng, Leftover::Deterministic)
                    .unwrap();
                for (i, l) in special.iter().enumerate() {
                    assert_eq!(xi.colour_of(&s, l), i as u32 + 1, "q={q} d={d}");
                }
                assert!(density(&s, &xi) >= m, "q={q} d={d} k={k} m={m}");
            }
        }
    });
}

#[test]
fn criterion_04_counting_bound() {
    criterion(4, "heavy-line counting bound", || {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for q in [3u64, 5, 7] {
            let s = space(q, 2);
            for k in [1u64, 2] {
                let bound = (k + 1) * (q - k) - k * (k + 1) / 2;
                if bound == 0 {
                    continue; // no set is below the bound (q=3, k=2)
                }
                for _ in 0..2000 {
                    let size = rng.random_range(0..bound);
                    let mut points: Vec<u64> = (0..s.num_points()).collect();
                    points.shuffle(&mut rng);
                    let e: PointSet = points.into_iter().take(size as usize).collect();
                    assert!(bound_heavy_lines(q, k, e.len() as u64));
                    let heavy = lines_meeting(&s, &e, q - k);
                    assert!(heavy.len() as u64 <= k, "q={q} k={k} E={e:?}");
                }
            }
        }
    });
}

/// A random (xi, E) pair: half knit colourings, half uniform dense ones;
/// E is a full line plus a few extra points.
fn sample_pair<R: Rng>(s: &Space, rng: &mut R) -> (Colouring, PointSet) {
    let q = s.q();
    let k = rng.random_range(1..q as u32);
    let xi = if rng.random_bool(0.5) {
        let m = s.num_directions() / k as u64 - 1;
        knit_colouring(s, &[], k, m.max(1), rng, Leftover::Randomized).unwrap()
    } else {
        let by_line: Vec<u32> = (0..s.num_lines()).map(|_| rng.random_range(1..=k)).collect();
        Colouring::dense(k, by_line)
    };
    let i = rng.random_range(0..s.num_points());
    let mut j = rng.random_range(0..s.num_points());
    while j == i {
        j = rng.random_range(0..s.num_points());
    }
    let mut e: PointSet = s
        .line_from_points(&s.point(i), &s.point(j))
        .unwrap()
        .points
        .iter()
        .copied()
        .collect();
    for _ in 0..rng.random_range(0..=2) {
        e.insert(rng.random_range(0..s.num_points()));
    }
    (xi, e)
}

#[test]
fn criterion_05_implication_chain() {
    criterion(5, "perfect => critical => distinguished", || {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut checked = 0;
        for q in [3u64, 5] {
            let s = space(q, 2);
            for _ in 0..300 {
                let (xi, e) = sample_pair(&s, &mut rng);
                let perfect = is_perfect(&s, &xi, &e);
                let critical = find_critical(&s, &xi, &e);
                if perfect {
                    assert!(critical.is_some(), "perfect but no critical witness: E={e:?}");
                }
                if critical.is_some() {
                    assert!(is_distinguished(&s, &xi, &e), "critical but not distinguished");
                    match is_very_distinguished(&s, &xi, &e, 10_000) {
                        VeryDistinguished::Yes => {}
                        VeryDistinguished::Truncated => {}
                        VeryDistinguished::No => panic!("critical but not very distinguished"),
                    }
                }
                checked += 1;
            }
        }
        assert!(checked >= 500);
    });
}

#[test]
fn criterion_06_swap_invariance() {
    criterion(6, "one-swap neighbours stay critical", || {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut criticals = 0;
        for q in [3u64, 5] {
            let s = space(q, 2);
            for _ in 0..250 {
                let (xi, e) = sample_pair(&s, &mut rng);
                if (xi.k as u64) >= q || find_critical(&s, &xi, &e).is_none() {
                    continue;
                }
                criticals += 1;
                for f in hue_neighbors(&s, &xi, &e) {
                    assert!(
                        find_critical(&s, &xi, &f).is_some(),
                        "neighbour lost criticality: E={e:?} F={f:?}"
                    );
                }
            }
        }
        assert!(criticals >= 50, "too few critical samples: {criticals}");
    });
}

fn end_to_end(a: u64, b: u64, c: u64, d: u32, k: u32, runs: u64, validated_cards: usize) {
    let params = ProtocolParams::new(a, b, c, d, k, None).unwrap();
    let s = params.space();
    for seed in 0..runs {
        let deal = deal_random(a, b, c, &mut ChaCha8Rng::seed_from_u64(seed));
        let t = run_protocol(&deal, &params, &s, seed, Leftover::Deterministic).unwrap();
        let claimed: BTreeSet<u32> = t.claimed_c.iter().copied().collect();
        assert_eq!(claimed, deal.cath, "seed {seed}");
        let report = check_weak_safety(&s, &t, &deal, None);
        assert!(report.pass, "safety failed at seed {seed}");
        // re-verify a few witness deals as full executions
        for cs in report.cards.iter().take(validated_cards) {
            for (witness, in_hand) in
                [(cs.in_alice.as_ref().unwrap(), true), (cs.in_bob.as_ref().unwrap(), false)]
            {
                let alt = witness_deal(a + b + c, witness, &deal.cath);
                assert_eq!(alt.alice.contains(&cs.card), in_hand);
                assert!(verify_execution(&s, &t, &alt).unwrap(), "witness not an execution");
            }
        }
    }
}

#[test]
fn criterion_07_end_to_end_runs() {
    criterion(7, "informativity and safety at scale", || {
        end_to_end(7, 41, 1, 2, 2, 500, 2);
        end_to_end(7, 332, 4, 3, 2, 50, 2);
    });
}

#[test]
fn criterion_08_negative_control() {
    criterion(8, "unsafe 2-colouring leaks a card", || {
        let params = ProtocolParams::new(3, 4, 2, 2, 2, None).unwrap();
        let s = params.space();
        let pt = |i: u64, j: u64| s.point_from_coords(&[i, j]).index;
        // solid lines: Alice's {00,01,02} and {02,11,20}; everything else dashed
        let solid1 = s.line_from_points(&s.point(pt(0, 0)), &s.point(pt(0, 2))).unwrap();
        let solid2 = s.line_from_points(&s.point(pt(0, 2)), &s.point(pt(1, 1))).unwrap();
        assert_eq!(
            solid2.points,
            {
                let mut v = vec![pt(0, 2), pt(1, 1), pt(2, 0)];
                v.sort_unstable();
                v
            }
        );
        let mut by_line = vec![2u32; s.num_lines() as usize];
        by_line[s.line_index(&solid1) as usize] = 1;
        by_line[s.line_index(&solid2) as usize] = 1;
        let xi = Colouring::dense(2, by_line);

        // identity card map: card i sits on point i-1
        let f: Vec<u64> = (0..9).collect();
        let card = |p: u64| p as u32 + 1;
        let alice: BTreeSet<u32> = [pt(0, 0), pt(0, 1), pt(0, 2)].map(card).into_iter().collect();
        let cath: BTreeSet<u32> = [pt(1, 2), pt(2, 2)].map(card).into_iter().collect();
        let bob: BTreeSet<u32> = (1..=9).filter(|c| !alice.contains(c) && !cath.contains(c)).collect();
        let deal = rcards::Deal { alice, bob, cath: cath.clone() };
        let t = rcards::Transcript {
            params,
            seed: 0,
            f,
            xi,
            colour: 1,
            claimed_c: cath.iter().copied().collect(),
        };

        let report = check_weak_safety(&s, &t, &deal, None);
        assert!(!report.pass);
        // both solid lines pass through 02, so Cath learns Alice holds it
        assert_eq!(report.leaked_to_alice(), vec![card(pt(0, 2))]);
    });
}

#[test]
fn criterion_09_c_exceeds_a_regime() {
    criterion(9, "c > a smoke run", || {
        let report = feasible(49, 171, 3, 7);
        assert!(report.feasible);
        assert!(report.c > 3 * report.a);

        let params = ProtocolParams::new(49, 117_429, 171, 3, 7, None).unwrap();
        let s = params.space();
        let deal = deal_random(49, 117_429, 171, &mut ChaCha8Rng::seed_from_u64(9));
        let t = run_protocol(&deal, &params, &s, 9, Leftover::Deterministic).unwrap();
        assert!(matches!(t.xi.repr, rcards::Repr::Compact { .. }));
        let claimed: BTreeSet<u32> = t.claimed_c.iter().copied().collect();
        assert_eq!(claimed, deal.cath);
        assert!(verify_execution(&s, &t, &deal).unwrap());
        assert!(check_informative(&s, &t, &deal));

        let mut rng = ChaCha8Rng::seed_from_u64(90);
        let mut pool: Vec<u32> = (1..=s.num_points() as u32)
            .filter(|c| !deal.cath.contains(c))
            .collect();
        pool.shuffle(&mut rng);
        pool.truncate(20);
        let report = check_weak_safety(&s, &t, &deal, Some(&pool));
        assert_eq!(report.cards.len(), 20);
        assert!(report.pass);
    });
}

#[test]
fn criterion_10_infeasibility_controls() {
    criterion(10, "infeasibility controls", || {
        assert_eq!(search_k(3, 1, 2), None);
        let dir = tempfile::tempdir().unwrap();
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_rcards"))
            .current_dir(dir.path())
            .args(["run", "--a", "3", "--c", "1", "--d", "2", "--k", "1"])
            .output()
            .unwrap();
        assert_eq!(status.status.code(), Some(2));
    });
}
