use funnynet::audio::{MelAnalyzer, MelParams};
use funnynet::nn::{Shape, Tape, Tensor};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]

    #[test]
    fn log_mel_is_finite_and_floored(samples in prop::collection::vec(-1.0f32..1.0, 1024..6000), gain in prop_oneof![Just(0.0f32), 1e-6f32..1.0]) {
        let p = MelParams::default();
        let m = MelAnalyzer::new(&p).unwrap().analyze(&samples.iter().map(|s| s * gain).collect::<Vec<_>>()).unwrap();
        let floor = p.log_floor.ln() as f32;
        for v in m.as_slice() {
            prop_assert!(v.is_finite());
            prop_assert!(*v >= floor - 1e-4);
        }
    }

    #[test]
    fn softmax_rows_are_positive_and_sum_to_one((rows, cols, vals) in (1usize..6, 1usize..9).prop_flat_map(|(r, c)| (Just(r), Just(c), prop::collection::vec(-80.0f64..80.0, r * c)))) {
        let mut tape = Tape::<f64>::eval();
        let x = tape.constant(Tensor::new(Shape::matrix(rows, cols), vals).unwrap());
        let s = tape.row_softmax(x);
        let out = &tape.value(s).values;
        for r in out.chunks(cols) {
            prop_assert!(r.iter().all(|v| *v > 0.0));
            prop_assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
