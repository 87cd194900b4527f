//! Rebuilds every golden vector with a from-scratch implementation of the
//! encode chain and checks the file and the library agree with it.

use nr_pdcch::dci::vectors::{parse_vectors, run_vector, TestVector, VectorOutcome};
use nr_pdcch::dci::CodecSuite;

const VECTORS: &str = include_str!("data/vectors.txt");

const INTERLEAVER: [usize; 164] = [
    0, 2, 4, 7, 9, 14, 19, 20, 24, 25, 26, 28, 31, 34, 42, 45, 49, 50, 51, 53, 54, 56, 58, 59, 61, 62, 65, 66, 67, 69,
    70, 71, 72, 76, 77, 81, 82, 83, 87, 88, 89, 91, 93, 95, 98, 101, 104, 106, 108, 110, 111, 113, 115, 118, 119, 120,
    122, 123, 126, 127, 129, 132, 134, 138, 139, 140, 1, 3, 5, 8, 10, 15, 21, 27, 29, 32, 35, 43, 46, 52, 55, 57, 60,
    63, 68, 73, 78, 84, 90, 92, 94, 96, 99, 102, 105, 107, 109, 112, 114, 116, 121, 124, 128, 130, 133, 135, 141, 6,
    11, 16, 22, 30, 33, 36, 44, 47, 64, 74, 79, 85, 97, 100, 103, 117, 125, 131, 136, 142, 12, 17, 23, 37, 48, 75, 80,
    86, 137, 143, 13, 18, 38, 144, 39, 145, 40, 146, 41, 147, 148, 149, 150, 151, 152, 153, 154, 155, 156, 157, 158,
    159, 160, 161, 162, 163,
];

/// g(D) = D^24+D^23+D^21+D^20+D^17+D^15+D^13+D^12+D^8+D^4+D^2+D+1, high degree first.
fn generator() -> Vec<u8> {
    let exps = [24, 23, 21, 20, 17, 15, 13, 12, 8, 4, 2, 1, 0];
    (0..=24).rev().map(|d| exps.contains(&d) as u8).collect()
}

/// Remainder of (ones(24) ‖ payload)·D^24 divided by g(D).
fn parity(payload: &[u8]) -> Vec<u8> {
    let g = generator();
    let mut work = vec![1u8; 24];
    work.extend_from_slice(payload);
    let n = work.len();
    work.extend(std::iter::repeat_n(0u8, 24));
    for i in 0..n {
        if work[i] == 1 {
            for (j, &b) in g.iter().enumerate() {
                work[i + j] ^= b;
            }
        }
    }
    work[n..].to_vec()
}

fn gold(c_init: u32, len: usize) -> Vec<u8> {
    let total = 1600 + len + 31;
    let mut x1 = vec![0u8; total];
    let mut x2 = vec![0u8; total];
    x1[0] = 1;
    for (i, b) in x2.iter_mut().take(31).enumerate() {
        *b = (c_init >> i & 1) as u8;
    }
    for n in 0..total - 31 {
        x1[n + 31] = (x1[n + 3] + x1[n]) % 2;
        x2[n + 31] = (x2[n + 3] + x2[n + 2] + x2[n + 1] + x2[n]) % 2;
    }
    (0..len).map(|n| (x1[n + 1600] + x2[n + 1600]) % 2).collect()
}

fn oracle_encode(v: &TestVector) -> Vec<u8> {
    let mut a = v.payload.clone();
    while a.len() < 12 {
        a.push(0);
    }
    let mut p = parity(&a);
    for i in 0..16 {
        p[8 + i] ^= (v.rnti >> (15 - i) & 1) as u8;
    }
    let mut c = a.clone();
    c.extend(p);
    let k = c.len();
    let offset = 164 - k;
    let interleaved: Vec<u8> = INTERLEAVER
        .iter()
        .filter(|&&x| x >= offset)
        .map(|&x| c[x - offset])
        .collect();
    let e = 108 * usize::from(v.level);
    let coded: Vec<u8> = (0..e).map(|i| interleaved[i % k]).collect();
    let s = gold(v.init.c_init(), e);
    coded.iter().zip(s).map(|(a, b)| a ^ b).collect()
}

#[test]
fn golden_vectors_match_oracle() {
    let vs = parse_vectors(VECTORS).unwrap();
    assert!(vs.len() >= 7);
    for v in &vs {
        assert_eq!(v.expected.len(), 108 * usize::from(v.level), "line {}", v.line);
        assert_eq!(oracle_encode(v), v.expected, "line {}", v.line);
        assert_eq!(
            run_vector(v, &CodecSuite::default()),
            VectorOutcome::Pass,
            "line {}",
            v.line
        );
    }
}

#[test]
fn qpsk_labeling_pinned() {
    use nr_pdcch::dci::{bits_to_qpsk, encode_candidate, DciFormat, DciMessage, Rnti, ScrambleInit};
    let vs = parse_vectors(VECTORS).unwrap();
    let v = &vs[0];
    let msg = DciMessage {
        format: DciFormat::F1_0,
        payload: v.payload.clone(),
        rnti: Rnti::c_rnti(v.rnti),
    };
    let coded = encode_candidate(
        &msg,
        v.level,
        &CodecSuite::default(),
        ScrambleInit::from_c_init(v.init.c_init()),
    )
    .unwrap();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for (z, pair) in coded.symbols.iter().zip(v.expected.chunks(2)) {
        assert_eq!(z.re, s * (1.0 - 2.0 * f64::from(pair[0])));
        assert_eq!(z.im, s * (1.0 - 2.0 * f64::from(pair[1])));
    }
    assert_eq!(coded.symbols, bits_to_qpsk(&v.expected));
}

#[test]
fn wrong_size_hypothesis_false_accepts() {
    use nr_pdcch::dci::{blind_decode, encode_candidate, DciFormat, DciMessage, Rnti, ScrambleInit, SizeHypothesis};
    use rand::{Rng, SeedableRng};

    let suite = CodecSuite::default();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(24);
    let trials = 100_000;
    let mut accepted = 0;
    let mut done = 0;
    while done < trials {
        let bits = rng.random_range(12..=140usize);
        let level = [2u8, 4, 8, 16][rng.random_range(0..4)];
        let msg = DciMessage {
            format: DciFormat::F0_1,
            payload: (0..bits).map(|_| rng.random_range(0..2u8)).collect(),
            rnti: Rnti::c_rnti(rng.random_range(1..=u16::MAX)),
        };
        let init = ScrambleInit::from_c_init(rng.random_range(0..1u32 << 31));
        let coded = encode_candidate(&msg, level, &suite, init).unwrap();
        for _ in 0..20 {
            let wrong = loop {
                let w = rng.random_range(12..=140usize);
                if w != bits {
                    break w;
                }
            };
            let hyp = [SizeHypothesis {
                format: msg.format,
                payload_bits: wrong,
            }];
            accepted += usize::from(blind_decode(&coded.symbols, &hyp, msg.rnti, &suite, init).is_some());
            done += 1;
        }
    }
    // Expected count is about trials * 2^-24, well below one.
    assert_eq!(accepted, 0, "{accepted} false accepts in {trials} wrong-size trials");
}
