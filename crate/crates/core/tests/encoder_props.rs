use funnynet::encoders::{
    chunk_bounds, encode_audio_stub, encode_text_stub, encode_visual_stub, fnv1a64, load_feature_file, FrameStack,
    Modality,
};
use funnynet::{fnwm, Matrix};
use proptest::prelude::*;
use rand::{seq::SliceRandom, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    use rand::RngExt;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-20.0f32..0.0)).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn permuting_frames_within_a_chunk_keeps_its_token(rows in 1usize..60, m in 1usize..9, seed in any::<u64>()) {
        let mel = matrix(rows, 6, seed);
        let base = encode_audio_stub(&mel, m).unwrap();
        let bounds = chunk_bounds(rows, m);
        let j = (seed as usize) % bounds.len();
        let (a, b) = bounds[j];
        let mut order: Vec<usize> = (0..rows).collect();
        order[a..b].shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 7));
        let permuted = Matrix::from_rows(&order.iter().map(|&r| mel.row(r).to_vec()).collect::<Vec<_>>()).unwrap();
        let got = encode_audio_stub(&permuted, m).unwrap();
        prop_assert_eq!(got.token_count(), m);
        for (x, y) in base.tokens.row(j).iter().zip(got.tokens.row(j)) {
            prop_assert!((x - y).abs() < 1e-4, "{x} vs {y}");
        }
    }

    #[test]
    fn one_word_changes_at_most_two_coordinates(
        words in prop::collection::vec("[a-z]{1,6}", 1..20),
        replacement in "[a-z]{1,6}",
        pick in any::<usize>(),
        m in 1usize..5,
    ) {
        let dim = 64;
        let i = pick % words.len();
        let mut other = words.clone();
        other[i] = replacement.clone();
        let a = encode_text_stub(&words.join(" "), m, dim).unwrap();
        let b = encode_text_stub(&other.join(" "), m, dim).unwrap();
        let slot = |w: &str| (fnv1a64(w.as_bytes()) % dim as u64) as usize;
        let allowed = [slot(&words[i]), slot(&replacement)];
        for r in 0..m {
            for c in 0..dim {
                if a.tokens.get(r, c) != b.tokens.get(r, c) {
                    prop_assert_eq!(r, i % m);
                    prop_assert!(allowed.contains(&c));
                }
            }
        }
    }

    #[test]
    fn frame_reversal_keeps_histogram_multiset(n in 1usize..12, seed in any::<u64>()) {
        use rand::RngExt;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pixels = Matrix::from_vec(n, 12, (0..n * 12).map(|_| rng.random_range(0.0f32..1.0)).collect()).unwrap();
        let frames = FrameStack::new(3, 4, pixels.clone()).unwrap();
        let reversed = FrameStack::new(
            3,
            4,
            Matrix::from_rows(&(0..n).rev().map(|r| pixels.row(r).to_vec()).collect::<Vec<_>>()).unwrap(),
        )
        .unwrap();
        let hist = |f: &FrameStack| {
            let t = encode_visual_stub(f, n).unwrap();
            let mut rows: Vec<Vec<u32>> = (0..n).map(|r| t.tokens.row(r)[..64].iter().map(|v| (v * 12.0).round() as u32).collect()).collect();
            rows.sort();
            rows
        };
        prop_assert_eq!(hist(&frames), hist(&reversed));
    }
}

#[test]
fn constant_frames_are_one_hot_without_motion() {
    for level in [0.0f32, 0.3, 0.999, 1.0] {
        let frames = FrameStack::new(2, 2, Matrix::from_vec(5, 4, vec![level; 20]).unwrap()).unwrap();
        let t = encode_visual_stub(&frames, 2).unwrap();
        let bin = ((level * 64.0) as usize).min(63);
        for r in 0..2 {
            let row = t.tokens.row(r);
            for (c, v) in row[..64].iter().enumerate() {
                assert_eq!(*v, if c == bin { 1.0 } else { 0.0 });
            }
            assert_eq!(row[64], 0.0);
        }
    }
}

#[test]
fn zero_mel_gives_identical_tokens() {
    let t = encode_audio_stub(&Matrix::zeros(40, 8), 4).unwrap();
    for r in 1..4 {
        assert_eq!(t.tokens.row(r), t.tokens.row(0));
    }
    assert!(t.tokens.row(0)[8..].iter().all(|v| *v == 0.0));
}

#[test]
fn single_row_feature_file_is_one_token() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("clip.fnwm");
    fnwm::write_matrix(&p, &matrix(1, 512, 3)).unwrap();
    let f = load_feature_file(&p, Modality::Visual, Some(512)).unwrap();
    assert_eq!((f.token_count(), f.dim()), (1, 512));
    assert!(load_feature_file(&p, Modality::Visual, Some(256)).is_err());
}

#[test]
fn text_is_case_and_spacing_insensitive() {
    let a = encode_text_stub("Hello   World\tagain", 2, 32).unwrap();
    let b = encode_text_stub("hello world again", 2, 32).unwrap();
    assert_eq!(a, b);
}
