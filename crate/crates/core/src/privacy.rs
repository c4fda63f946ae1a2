//! Privacy amplification by seeded binary Toeplitz hashing over GF(2).

use rand::Rng;

use crate::error::{contract, Result};
use crate::protocol::SessionConfig;
use crate::quantum_sim::binary_entropy;

/// Diagonal-constant matrix description: `T[i][j] = bits[i - j + input_len - 1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToeplitzSeed {
    bits: Vec<u8>,
    input_len: usize,
    output_len: usize,
}

impl ToeplitzSeed {
    pub fn from_bits(bits: Vec<u8>, input_len: usize, output_len: usize) -> Result<Self> {
        if input_len == 0 {
            return Err(contract("Toeplitz hash needs a non-empty input"));
        }
        let expected = input_len + output_len - 1;
        if bits.len() != expected {
            return Err(contract(format!(
                "Toeplitz seed for {input_len}->{output_len} needs {expected} bits, got {}",
                bits.len()
            )));
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(contract("seed bits must be 0 or 1"));
        }
        Ok(Self {
            bits,
            input_len,
            output_len,
        })
    }

    pub fn random<R: Rng + ?Sized>(input_len: usize, output_len: usize, rng: &mut R) -> Result<Self> {
        let n = (input_len + output_len).saturating_sub(1);
        let bits = (0..n).map(|_| u8::from(rng.random_bool(0.5))).collect();
        Self::from_bits(bits, input_len, output_len)
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn input_len(&self) -> usize {
        self.input_len
    }

    pub fn output_len(&self) -> usize {
        self.output_len
    }
}

/// `max(0, floor(n (1 - 2 h(q))) - margin)`.
pub fn output_length(raw_len: usize, qber: f64, margin: usize) -> Result<usize> {
    let rate = 1.0 - 2.0 * binary_entropy(qber)?;
    let bits = (raw_len as f64 * rate).floor();
    if bits <= 0.0 {
        return Ok(0);
    }
    Ok((bits as usize).saturating_sub(margin))
}

fn pack(bits: impl Iterator<Item = u8>, len: usize) -> Vec<u64> {
    // One spare word so that unaligned windows can always read `word + 1`.
    let mut words = vec![0u64; len.div_ceil(64) + 1];
    for (t, b) in bits.enumerate() {
        words[t / 64] |= u64::from(b & 1) << (t % 64);
    }
    words
}

/// Multiplies `input` by the Toeplitz matrix described by `seed`.
pub fn toeplitz_hash(input: &[u8], seed: &ToeplitzSeed) -> Result<Vec<u8>> {
    let n = input.len();
    if n != seed.input_len {
        return Err(contract(format!(
            "input has {n} bits but the seed was drawn for {}",
            seed.input_len
        )));
    }
    // y_i = Σ_k seed[i + k] · x[n - 1 - k], i.e. the parity of a sliding
    // window of the seed against the reversed input.
    let reversed = pack(input.iter().rev().copied(), n);
    let seed_words = pack(seed.bits.iter().copied(), seed.bits.len());
    let full_words = n / 64;
    let tail_bits = n % 64;
    let tail_mask = if tail_bits == 0 { 0 } else { (1u64 << tail_bits) - 1 };

    let out = (0..seed.output_len)
        .map(|i| {
            let (word, shift) = (i / 64, i % 64);
            let window = |m: usize| -> u64 {
                let lo = seed_words[word + m] >> shift;
                if shift == 0 {
                    lo
                } else {
                    lo | (seed_words.get(word + m + 1).copied().unwrap_or(0) << (64 - shift))
                }
            };
            let mut acc = 0u64;
            for m in 0..full_words {
                acc ^= window(m) & reversed[m];
            }
            if tail_bits != 0 {
                acc ^= window(full_words) & reversed[full_words] & tail_mask;
            }
            (acc.count_ones() & 1) as u8
        })
        .collect();
    Ok(out)
}

/// Compresses the raw key to `output_length(|raw|, qber, config.pa_security_margin)` bits.
pub fn privacy_amplify(
    raw_key: &[u8],
    estimated_qber: f64,
    config: &SessionConfig,
    seed: &ToeplitzSeed,
) -> Result<Vec<u8>> {
    let (qber_threshold, margin) = (config.qber_threshold, config.pa_security_margin);
    if raw_key.is_empty() {
        return Err(contract("privacy amplification of an empty raw key"));
    }
    if estimated_qber > qber_threshold {
        return Err(contract(format!(
            "estimated QBER {estimated_qber} exceeds threshold {qber_threshold}"
        )));
    }
    let len = output_length(raw_key.len(), estimated_qber, margin)?;
    if seed.output_len != len {
        return Err(contract(format!(
            "seed produces {} bits but {len} are required",
            seed.output_len
        )));
    }
    toeplitz_hash(raw_key, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Party};
    use proptest::prelude::*;

    fn cfg(qber_threshold: f64, pa_security_margin: usize) -> SessionConfig {
        SessionConfig {
            qber_threshold,
            pa_security_margin,
            ..Default::default()
        }
    }

    /// Dense matrix-vector product, row by row.
    fn naive_hash(input: &[u8], seed: &ToeplitzSeed) -> Vec<u8> {
        let n = input.len();
        (0..seed.output_len())
            .map(|i| {
                (0..n)
                    .map(|j| seed.bits()[i + n - 1 - j] & input[j])
                    .fold(0, |a, b| a ^ b)
            })
            .collect()
    }

    #[test]
    fn output_length_examples() {
        assert_eq!(output_length(250, 0.0, 0).unwrap(), 250);
        assert_eq!(output_length(250, 0.0, 10).unwrap(), 240);
        assert_eq!(output_length(250, 0.0, 300).unwrap(), 0);
        for n in [1, 100, 1000, 5000] {
            assert_eq!(output_length(n, 0.11, 0).unwrap(), 0);
        }
        assert_eq!(output_length(1000, 0.3, 0).unwrap(), 0);
        assert!(output_length(10, 1.5, 0).is_err());
    }

    #[test]
    fn zero_qber_keeps_length() {
        let raw: Vec<u8> = (0..250).map(|i| (i % 3 == 0) as u8).collect();
        let seed = ToeplitzSeed::random(250, 250, &mut stream(1, 0, Party::PrivacyAmplification)).unwrap();
        let out = privacy_amplify(&raw, 0.0, &cfg(0.08, 0), &seed).unwrap();
        assert_eq!(out.len(), 250);
        assert_eq!(out, naive_hash(&raw, &seed));
    }

    #[test]
    fn qber_at_limit_gives_empty_key() {
        let raw = vec![1u8; 3000];
        let seed = ToeplitzSeed::random(3000, 0, &mut stream(1, 0, Party::PrivacyAmplification)).unwrap();
        assert!(privacy_amplify(&raw, 0.11, &cfg(0.11, 0), &seed).unwrap().is_empty());
    }

    #[test]
    fn contract_errors() {
        let seed = ToeplitzSeed::random(10, 10, &mut stream(1, 0, Party::PrivacyAmplification)).unwrap();
        assert!(privacy_amplify(&[], 0.0, &cfg(0.08, 0), &seed).is_err());
        assert!(privacy_amplify(&[0; 10], 0.1, &cfg(0.08, 0), &seed).is_err());
        assert!(privacy_amplify(&[0; 10], 0.0, &cfg(0.08, 3), &seed).is_err());
        assert!(privacy_amplify(&[0; 11], 0.0, &cfg(0.08, 0), &seed).is_err());
        assert!(ToeplitzSeed::from_bits(vec![0; 5], 3, 4).is_err());
        assert!(ToeplitzSeed::from_bits(vec![2; 6], 3, 4).is_err());
    }

    #[test]
    fn deterministic_for_same_seed() {
        let raw: Vec<u8> = (0..500).map(|i| ((i * 7) % 5 < 2) as u8).collect();
        let s1 = ToeplitzSeed::random(500, 300, &mut stream(9, 0, Party::PrivacyAmplification)).unwrap();
        let s2 = ToeplitzSeed::random(500, 300, &mut stream(9, 0, Party::PrivacyAmplification)).unwrap();
        assert_eq!(toeplitz_hash(&raw, &s1).unwrap(), toeplitz_hash(&raw, &s2).unwrap());
    }

    #[test]
    fn single_bit_flip_avalanche() {
        let n = 400;
        let l = 200;
        let raw: Vec<u8> = (0..n).map(|i| ((i * 13) % 7 < 3) as u8).collect();
        let mut flipped = raw.clone();
        flipped[123] ^= 1;
        let trials = 1000;
        let mut changed = 0usize;
        for t in 0..trials {
            let seed = ToeplitzSeed::random(n, l, &mut stream(42, t, Party::PrivacyAmplification)).unwrap();
            let a = toeplitz_hash(&raw, &seed).unwrap();
            let b = toeplitz_hash(&flipped, &seed).unwrap();
            changed += a.iter().zip(&b).filter(|(x, y)| x != y).count();
        }
        let mean = changed as f64 / trials as f64;
        // Each output bit flips with probability 1/2: σ of the mean ≈ sqrt(l/4/trials).
        let sigma = (l as f64 / 4.0 / trials as f64).sqrt();
        assert!((mean - l as f64 / 2.0).abs() < 5.0 * sigma, "mean changed bits {mean}");
    }

    proptest! {
        #[test]
        fn packed_hash_matches_dense_product(
            input in proptest::collection::vec(0u8..2, 1..300),
            out_len in 0usize..200,
            seed_id in any::<u64>(),
        ) {
            let seed = ToeplitzSeed::random(input.len(), out_len, &mut stream(seed_id, 0, Party::PrivacyAmplification)).unwrap();
            prop_assert_eq!(toeplitz_hash(&input, &seed).unwrap(), naive_hash(&input, &seed));
        }

        #[test]
        fn hash_is_linear(
            pair in (1usize..200).prop_flat_map(|n| (
                proptest::collection::vec(0u8..2, n),
                proptest::collection::vec(0u8..2, n),
            )),
            seed_id in any::<u64>(),
        ) {
            let (x, y) = pair;
            let seed = ToeplitzSeed::random(x.len(), 64, &mut stream(seed_id, 1, Party::PrivacyAmplification)).unwrap();
            let xy: Vec<u8> = x.iter().zip(&y).map(|(a, b)| a ^ b).collect();
            let hx = toeplitz_hash(&x, &seed).unwrap();
            let hy = toeplitz_hash(&y, &seed).unwrap();
            let sum: Vec<u8> = hx.iter().zip(&hy).map(|(a, b)| a ^ b).collect();
            prop_assert_eq!(toeplitz_hash(&xy, &seed).unwrap(), sum);
        }
    }
}
