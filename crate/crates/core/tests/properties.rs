mod support;

use covpref::codec::{encode, validate_and_decode, TokenSeq, Vocab};
use covpref::corpus;
use covpref::hdl::{lint, parse, pretty_print};
use covpref::policy::{sample_sequence, TabularPolicy};
use covpref::sim::{simulate, CoverageReport, Simulator, Stimulus};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn expr() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        prop::sample::select(vec!["a", "b", "r", "w", "y"]).prop_map(str::to_string),
        (0u64..40).prop_map(|v| v.to_string()),
        (0u64..16).prop_map(|v| format!("0x{v:x}")),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        let ops = vec!["|", "^", "&", "==", "!=", "<", ">", "<<", ">>", "+", "-"];
        prop_oneof![
            (inner.clone(), prop::sample::select(ops), inner.clone())
                .prop_map(|(l, op, r)| format!("({l} {op} {r})")),
            (prop::sample::select(vec!["~", "!"]), inner.clone())
                .prop_map(|(u, e)| format!("{u}{e}")),
            (
                inner.clone(),
                prop::sample::select(vec!["+", "-", "&"]),
                inner
            )
                .prop_map(|(l, op, r)| format!("{l} {op} {r}")),
        ]
    })
}

/// A statement list and the number of `if`s in it.
fn stmts(depth: u32) -> BoxedStrategy<(String, usize)> {
    let simple = prop_oneof![
        (prop::sample::select(vec!["w", "y"]), expr())
            .prop_map(|(t, e)| (format!("assign {t} = {e};\n"), 0)),
        expr().prop_map(|e| (format!("next r = {e};\n"), 0)),
    ];
    let stmt: BoxedStrategy<(String, usize)> = if depth == 0 {
        simple.boxed()
    } else {
        prop_oneof![
            3 => simple,
            1 => (expr(), stmts(depth - 1), prop::option::of(stmts(depth - 1))).prop_map(|(c, (t, nt), e)| {
                match e {
                    Some((e, ne)) => (format!("if ({c}) {{\n{t}}} else {{\n{e}}}\n"), 1 + nt + ne),
                    None => (format!("if ({c}) {{\n{t}}}\n"), 1 + nt),
                }
            }),
        ]
        .boxed()
    };
    prop::collection::vec(stmt, 0..4)
        .prop_map(|v| {
            v.into_iter()
                .fold((String::new(), 0), |(s, n), (t, k)| (s + &t, n + k))
        })
        .boxed()
}

/// Source text of a lint-clean design, its `if` count, and its input widths.
fn design() -> impl Strategy<Value = (String, usize, (u32, u32))> {
    (1u32..=2, 1u32..=2, expr(), expr(), stmts(3)).prop_map(|(wa, wb, e1, e2, (body, ifs))| {
        let src = format!(
            "module g (input a[{wa}], input b[{wb}], output y[4]);\n\
             reg r[3] = 5;\nwire w[4];\nassign w = {e1};\nassign y = {e2};\n{body}\
             cover y {{ lo: 0..3, hi: 4..15 }}\ncover r {{ z: 0..0, top: 7..7 }}\nendmodule\n"
        );
        (src, ifs, (wa, wb))
    })
}

fn stimulus(widths: (u32, u32)) -> impl Strategy<Value = Vec<Vec<u64>>> {
    let (wa, wb) = widths;
    prop::collection::vec(
        (0..(1u64 << wa), 0..(1u64 << wb)).prop_map(|(a, b)| vec![a, b]),
        1..=8,
    )
}

fn covered(r: &CoverageReport) -> [usize; 3] {
    [r.statement.covered, r.branch.covered, r.functional.covered]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn generated_designs_are_clean_and_round_trip((src, _, _) in design()) {
        let model = parse(&src).unwrap();
        prop_assert!(lint(&model).is_empty(), "{:?}", lint(&model));
        let printed = pretty_print(&model);
        let reparsed = parse(&printed).unwrap();
        prop_assert_eq!(&reparsed, &model);
        prop_assert_eq!(pretty_print(&reparsed), printed);
    }

    #[test]
    fn two_branch_outcomes_per_conditional((src, ifs, _) in design()) {
        let model = parse(&src).unwrap();
        prop_assert_eq!(model.num_conditionals(), ifs);
        prop_assert_eq!(model.total_branch_outcomes(), 2 * ifs);
    }

    #[test]
    fn coverage_grows_with_prefixes(
        (src, stim) in design().prop_flat_map(|(src, _, w)| (Just(src), stimulus(w)))
    ) {
        let model = parse(&src).unwrap();
        let sim = Simulator::new(&model).unwrap();
        let mut last = [0; 3];
        for len in 1..=stim.len() {
            let r = sim.run(&Stimulus::new(stim[..len].to_vec())).unwrap();
            let now = covered(&r);
            prop_assert!(now.iter().zip(&last).all(|(n, l)| n >= l), "{:?} then {:?}", last, now);
            prop_assert!((0.0..=1.0).contains(&r.average));
            prop_assert!(r.statement.covered <= r.statement.total);
            prop_assert!(r.branch.covered <= r.branch.total);
            prop_assert!(r.functional.covered <= r.functional.total);
            last = now;
        }
    }

    #[test]
    fn simulation_is_deterministic(
        (src, stim) in design().prop_flat_map(|(src, _, w)| (Just(src), stimulus(w)))
    ) {
        let model = parse(&src).unwrap();
        let stim = Stimulus::new(stim);
        prop_assert_eq!(simulate(&model, &stim).unwrap(), simulate(&model, &stim).unwrap());
    }

    #[test]
    fn codec_round_trips(
        (src, stim) in design().prop_flat_map(|(src, _, w)| (Just(src), stimulus(w)))
    ) {
        let model = parse(&src).unwrap();
        let vocab = Vocab::default();
        let stim = Stimulus::new(stim);
        let seq = encode(&model, &vocab, &stim).unwrap();
        prop_assert!(seq.check_well_formed(&vocab, 8).is_ok());
        prop_assert_eq!(validate_and_decode(&model, &vocab, &seq, 8).unwrap(), stim);
    }

    #[test]
    fn decode_accepts_exactly_in_range_tokens(values in prop::collection::vec(0u32..16, 1..=8), which in 0usize..6) {
        let (_, src) = corpus::BUNDLED[which];
        let model = parse(src).unwrap();
        let vocab = Vocab::default();
        let w = model.input_width();
        let seq = TokenSeq::from_values(&vocab, &values);
        let ok = validate_and_decode(&model, &vocab, &seq, 8).is_ok();
        prop_assert_eq!(ok, values.iter().all(|&v| v < (1 << w)));
    }

    #[test]
    fn samples_are_well_formed_and_reproducible(seed in any::<u64>(), tau in 0.1f64..3.0) {
        let vocab = Vocab::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let policy = support::random_policy(vocab, 2, 8, "d", 2.0, &mut rng);
        let a = sample_sequence(&policy, "d", tau, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let b = sample_sequence(&policy, "d", tau, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.check_well_formed(&vocab, 8).is_ok());
        prop_assert!(!a.interior().contains(&vocab.bos()));
    }

    #[test]
    fn log_prob_is_sum_of_steps(seed in any::<u64>()) {
        let vocab = Vocab::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let policy = support::random_policy(vocab, 2, 8, "d", 2.0, &mut rng);
        let seq = support::random_seq(&vocab, 8, &mut rng);
        let lp = policy.log_prob("d", &seq).unwrap();
        prop_assert_eq!(lp.per_step.len(), seq.len() - 1);
        prop_assert!((lp.per_step.iter().sum::<f64>() - lp.total).abs() < 1e-12);
        prop_assert!(lp.per_step.iter().all(|&s| s <= 0.0));
    }

    #[test]
    fn checkpoint_round_trip_is_exact(seed in any::<u64>()) {
        let vocab = Vocab::new(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let policy = support::random_policy(vocab, 2, 4, "d", 5.0, &mut rng);
        let back = TabularPolicy::from_json(&policy.to_json().unwrap()).unwrap();
        prop_assert_eq!(back.to_json().unwrap(), policy.to_json().unwrap());
        let seq = support::random_seq(&vocab, 4, &mut rng);
        prop_assert_eq!(back.log_prob("d", &seq).unwrap(), policy.log_prob("d", &seq).unwrap());
    }
}

#[test]
fn bundled_prefix_monotonicity_on_random_stimuli() {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let designs = corpus::bundled();
    for _ in 0..1000 {
        let d = &designs[rng.gen_range(0..designs.len())];
        let widths: Vec<u32> = d.model.inputs().map(|p| p.width).collect();
        let len = rng.gen_range(1..=8);
        let stim: Vec<Vec<u64>> = (0..len)
            .map(|_| {
                widths
                    .iter()
                    .map(|&w| rng.gen_range(0..(1u64 << w)))
                    .collect()
            })
            .collect();
        let sim = Simulator::new(&d.model).unwrap();
        let cut = rng.gen_range(1..=len);
        let short = sim.run(&Stimulus::new(stim[..cut].to_vec())).unwrap();
        let full = sim.run(&Stimulus::new(stim)).unwrap();
        assert!(covered(&short)
            .iter()
            .zip(covered(&full))
            .all(|(s, f)| *s <= f));
    }
}
