//! Redundancy widths, code rates, error-state counts, and bit-exact
//! encode/decode for the five protection methods.
//!
//! Codeword layout is fixed as data low, check bits high, overall parity
//! last, so generated connectivity properties and the reference model agree
//! bit-exactly.

use num_bigint::BigUint;
use thiserror::Error;

use crate::bits::Bits;
use crate::spec_model::ProtectionMethod;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EccError {
    #[error("data width must be >= 1")]
    ZeroWidth,
    #[error("error budget must be >= 1")]
    ZeroErrorBudget,
    #[error("error budget {budget} exceeds codeword width {width}")]
    BudgetTooLarge { budget: u32, width: u32 },
    #[error("copy width mismatch: {0} vs {1}")]
    CopyWidthMismatch(usize, usize),
    #[error("codeword length {len} does not match any {method} geometry")]
    BadCodewordLength { method: ProtectionMethod, len: usize },
}

/// Width bookkeeping for one protected register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct CodeGeometry {
    pub method: ProtectionMethod,
    pub data_width: u32,
    pub redundant_bits: u32,
    pub max_errors: u32,
}

impl CodeGeometry {
    pub fn new(method: ProtectionMethod, data_width: u32) -> Result<Self, EccError> {
        Ok(CodeGeometry {
            method,
            data_width,
            redundant_bits: redundant_bits(method, data_width)?,
            max_errors: method.max_detectable_errors(),
        })
    }

    pub fn total_width(&self) -> u32 {
        self.data_width + self.redundant_bits
    }
}

/// Smallest r with 2^r >= data_width + r + 1 (Hamming check-bit count).
fn hamming_r(data_width: u32) -> u32 {
    let mut r = 1u32;
    while (1u64 << r) < data_width as u64 + r as u64 + 1 {
        r += 1;
    }
    r
}

/// Number of redundant bits a protection method adds to `data_width` bits.
pub fn redundant_bits(method: ProtectionMethod, data_width: u32) -> Result<u32, EccError> {
    if data_width == 0 {
        return Err(EccError::ZeroWidth);
    }
    Ok(match method {
        ProtectionMethod::Parity => 1,
        ProtectionMethod::Ded => hamming_r(data_width),
        ProtectionMethod::Secded => hamming_r(data_width) + 1,
        ProtectionMethod::Dmr => data_width,
        ProtectionMethod::Tmr => 2 * data_width,
    })
}

/// Data bits divided by total bits.
pub fn code_rate(method: ProtectionMethod, data_width: u32) -> Result<f64, EccError> {
    let r = redundant_bits(method, data_width)?;
    Ok(data_width as f64 / (data_width + r) as f64)
}

/// Number of (register state, fault pattern) pairs a fault-injection proof
/// must consider: 2^Nd * sum_{i=1..Ne} C(Nd+Nr, i). Exact at any width.
pub fn error_state_count(data_width: u32, redundant: u32, max_errors: u32) -> Result<BigUint, EccError> {
    if max_errors == 0 {
        return Err(EccError::ZeroErrorBudget);
    }
    let total = data_width + redundant;
    if max_errors > total {
        return Err(EccError::BudgetTooLarge { budget: max_errors, width: total });
    }
    let mut masks = BigUint::from(0u32);
    for i in 1..=max_errors {
        masks += binomial(total as u64, i as u64);
    }
    Ok((BigUint::from(1u32) << data_width) * masks)
}

fn binomial(n: u64, k: u64) -> BigUint {
    let mut acc = BigUint::from(1u32);
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

/// Decode outcome for any of the codecs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeStatus {
    NoError,
    CorrectedSingle,
    DetectedDouble,
    /// Redundancy methods: copies disagree (no correction claim for DMR).
    Mismatch,
}

impl DecodeStatus {
    pub fn is_error(self) -> bool {
        self != DecodeStatus::NoError
    }
}

/// Extended-Hamming position of data bit `k` (1-based positions, skipping
/// powers of two: 3, 5, 6, 7, 9, ...).
fn data_position(k: u32) -> u32 {
    let mut pos: u32 = 2;
    let mut remaining = k + 1;
    loop {
        pos += 1;
        if !pos.is_power_of_two() {
            remaining -= 1;
            if remaining == 0 {
                return pos;
            }
        }
    }
}

fn hamming_checks(data: &Bits, r: u32) -> Bits {
    let mut checks = Bits::zeros(r as usize);
    for k in 0..data.len() {
        if data.get(k) {
            let pos = data_position(k as u32);
            for j in 0..r {
                if pos & (1 << j) != 0 {
                    checks.flip(j as usize);
                }
            }
        }
    }
    checks
}

/// SECDED encode: data[Nd-1:0] || hamming checks[r-1:0] || overall parity.
pub fn secded_encode(data: &Bits) -> Result<Bits, EccError> {
    if data.is_empty() {
        return Err(EccError::ZeroWidth);
    }
    let r = hamming_r(data.len() as u32);
    let checks = hamming_checks(data, r);
    let body = data.concat(&checks);
    let parity = body.popcount() % 2 == 1;
    Ok(body.concat(&Bits::from_bools(vec![parity])))
}

/// SECDED decode with single-error correction and double-error detection.
pub fn secded_decode(codeword: &Bits) -> Result<(Bits, DecodeStatus), EccError> {
    let len = codeword.len() as u32;
    // Recover Nd from the total width: Nd + r + 1 = len with r = hamming_r(Nd).
    let data_width = (1..len)
        .find(|&d| d + hamming_r(d) + 1 == len)
        .ok_or(EccError::BadCodewordLength { method: ProtectionMethod::Secded, len: len as usize })?;
    let r = hamming_r(data_width);
    let data = codeword.slice(data_width as usize - 1, 0);
    let stored_checks = codeword.slice((data_width + r) as usize - 1, data_width as usize);
    let syndrome_bits = hamming_checks(&data, r).xor(&stored_checks);
    let syndrome: u32 = (0..r).map(|j| (syndrome_bits.get(j as usize) as u32) << j).sum();
    let parity_ok = codeword.popcount().is_multiple_of(2);

    if syndrome == 0 && parity_ok {
        return Ok((data, DecodeStatus::NoError));
    }
    if !parity_ok {
        // Odd number of flips within distance 4: treat as a single error.
        let mut corrected = data;
        if syndrome != 0 {
            // Correct only data positions; a flipped check or parity bit
            // leaves the data intact.
            if let Some(k) = (0..data_width).find(|&k| data_position(k) == syndrome) {
                corrected.flip(k as usize);
            }
        }
        return Ok((corrected, DecodeStatus::CorrectedSingle));
    }
    // Even parity with nonzero syndrome: uncorrectable double error.
    Ok((data, DecodeStatus::DetectedDouble))
}

/// Even-parity encode: data || parity bit.
pub fn parity_encode(data: &Bits) -> Result<Bits, EccError> {
    if data.is_empty() {
        return Err(EccError::ZeroWidth);
    }
    let parity = data.popcount() % 2 == 1;
    Ok(data.concat(&Bits::from_bools(vec![parity])))
}

/// Even-parity check; flags every odd-weight fault.
pub fn parity_check(codeword: &Bits) -> Result<(Bits, DecodeStatus), EccError> {
    if codeword.len() < 2 {
        return Err(EccError::BadCodewordLength { method: ProtectionMethod::Parity, len: codeword.len() });
    }
    let data = codeword.slice(codeword.len() - 2, 0);
    let status = if codeword.popcount().is_multiple_of(2) { DecodeStatus::NoError } else { DecodeStatus::Mismatch };
    Ok((data, status))
}

/// DED: Hamming checks used detect-only (no correction attempt).
pub fn ded_encode(data: &Bits) -> Result<Bits, EccError> {
    if data.is_empty() {
        return Err(EccError::ZeroWidth);
    }
    let r = hamming_r(data.len() as u32);
    Ok(data.concat(&hamming_checks(data, r)))
}

pub fn ded_check(codeword: &Bits) -> Result<(Bits, DecodeStatus), EccError> {
    let len = codeword.len() as u32;
    let data_width = (1..len)
        .find(|&d| d + hamming_r(d) == len)
        .ok_or(EccError::BadCodewordLength { method: ProtectionMethod::Ded, len: len as usize })?;
    let r = hamming_r(data_width);
    let data = codeword.slice(data_width as usize - 1, 0);
    let stored = codeword.slice((data_width + r) as usize - 1, data_width as usize);
    let status = if hamming_checks(&data, r) == stored {
        DecodeStatus::NoError
    } else {
        DecodeStatus::Mismatch
    };
    Ok((data, status))
}

/// DMR: flags any copy mismatch, no correction. Returns the first copy.
pub fn dmr_check(a: &Bits, b: &Bits) -> Result<(Bits, DecodeStatus), EccError> {
    if a.len() != b.len() {
        return Err(EccError::CopyWidthMismatch(a.len(), b.len()));
    }
    let status = if a == b { DecodeStatus::NoError } else { DecodeStatus::Mismatch };
    Ok((a.clone(), status))
}

/// TMR: bitwise majority of three copies; flags any disagreement.
pub fn tmr_vote(a: &Bits, b: &Bits, c: &Bits) -> Result<(Bits, DecodeStatus), EccError> {
    if a.len() != b.len() || b.len() != c.len() {
        return Err(EccError::CopyWidthMismatch(a.len(), c.len()));
    }
    let voted = Bits::from_bools(
        (0..a.len())
            .map(|i| (a.get(i) as u8 + b.get(i) as u8 + c.get(i) as u8) >= 2)
            .collect(),
    );
    let status = if a == b && b == c { DecodeStatus::NoError } else { DecodeStatus::Mismatch };
    Ok((voted, status))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec_model::ProtectionMethod::*;

    #[test]
    fn redundant_bits_endpoints() {
        assert_eq!(redundant_bits(Secded, 4).unwrap(), 4);
        assert_eq!(redundant_bits(Secded, 512).unwrap(), 11);
        assert_eq!(redundant_bits(Dmr, 8).unwrap(), 8);
        assert_eq!(redundant_bits(Tmr, 8).unwrap(), 16);
        assert_eq!(redundant_bits(Parity, 100).unwrap(), 1);
        assert_eq!(redundant_bits(Parity, 0), Err(EccError::ZeroWidth));
    }

    #[test]
    fn secded_is_ded_plus_one() {
        for d in 1..=512 {
            assert_eq!(
                redundant_bits(Secded, d).unwrap(),
                redundant_bits(Ded, d).unwrap() + 1,
                "d={}",
                d
            );
        }
    }

    #[test]
    fn redundant_bits_monotone_step_function() {
        let mut prev = 0;
        let mut values = std::collections::BTreeSet::new();
        for d in 4..=512 {
            let r = redundant_bits(Secded, d).unwrap();
            assert!(r >= prev, "not monotone at d={}", d);
            prev = r;
            values.insert(r);
        }
        assert_eq!(values.into_iter().collect::<Vec<_>>(), (4..=11).collect::<Vec<_>>());
    }

    #[test]
    fn code_rate_values() {
        assert!((code_rate(Secded, 4).unwrap() - 0.5).abs() < 1e-12);
        assert!((code_rate(Secded, 512).unwrap() - 512.0 / 523.0).abs() < 1e-12);
        for n in [1, 7, 100] {
            assert!((code_rate(Tmr, n).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        }
        // The rate rises strictly while the redundant-bit count is constant
        // and dips at each step (11/16 > 12/18), so monotonicity only holds
        // within plateaus. The endpoints pin the overall trend.
        let mut prev = 0.0;
        let mut prev_r = 0;
        for d in 1..=512 {
            let rate = code_rate(Secded, d).unwrap();
            let r = redundant_bits(Secded, d).unwrap();
            if r == prev_r {
                assert!(rate > prev, "not increasing at d={}", d);
            }
            prev = rate;
            prev_r = r;
        }
    }

    /// Independent oracle: count all (state, fault-mask) pairs by enumeration.
    fn brute_force_error_states(nd: u32, nr: u32, ne: u32) -> u64 {
        let total = nd + nr;
        assert!(total <= 20);
        let mut count = 0u64;
        for _state in 0u64..(1 << nd) {
            for mask in 1u64..(1 << total) {
                let pop = mask.count_ones();
                if pop >= 1 && pop <= ne {
                    count += 1;
                }
            }
        }
        count
    }

    #[test]
    fn error_state_count_examples() {
        assert_eq!(error_state_count(4, 4, 2).unwrap(), BigUint::from(576u32));
        assert_eq!(error_state_count(1, 1, 1).unwrap(), BigUint::from(4u32));
        assert_eq!(error_state_count(8, 5, 2).unwrap(), BigUint::from(23296u32));
        assert_eq!(brute_force_error_states(4, 4, 2), 576);
        assert_eq!(brute_force_error_states(8, 5, 2), 23296);
        assert_eq!(error_state_count(4, 4, 0), Err(EccError::ZeroErrorBudget));
    }

    #[test]
    fn error_state_count_matches_brute_force() {
        for nd in 1..=8u32 {
            for method in [Parity, Ded, Secded] {
                let nr = redundant_bits(method, nd).unwrap();
                if nd + nr > 13 {
                    continue;
                }
                for ne in 1..=2u32 {
                    let exact = error_state_count(nd, nr, ne).unwrap();
                    assert_eq!(exact, BigUint::from(brute_force_error_states(nd, nr, ne)));
                }
            }
        }
    }

    #[test]
    fn error_state_count_is_arbitrary_precision() {
        // 2^512 alone overflows any machine word.
        let n = error_state_count(512, 11, 2).unwrap();
        assert!(n.bits() > 512);
    }

    #[test]
    fn secded_zero_maps_to_zero() {
        let cw = secded_encode(&Bits::zeros(4)).unwrap();
        assert!(cw.is_zero());
        assert_eq!(cw.len(), 8);
    }

    #[test]
    fn secded_golden_codeword() {
        // d=4, data=0b1011: data bits 0,1,3 sit at positions 3,5,7, so the
        // three check bits are 3^5^7 = 0b001; body popcount is even, parity 0.
        // Codeword frozen as a golden value.
        let cw = secded_encode(&Bits::from_u64(0b1011, 4)).unwrap();
        assert_eq!(cw.len(), 8);
        assert_eq!(cw.to_u64(), 0b0001_1011);
        let (data, status) = secded_decode(&cw).unwrap();
        assert_eq!(data.to_u64(), 0b1011);
        assert_eq!(status, DecodeStatus::NoError);
    }

    #[test]
    fn secded_linearity() {
        for x in 0u64..32 {
            for y in 0u64..32 {
                let ex = secded_encode(&Bits::from_u64(x, 5)).unwrap();
                let ey = secded_encode(&Bits::from_u64(y, 5)).unwrap();
                let exy = secded_encode(&Bits::from_u64(x ^ y, 5)).unwrap();
                assert_eq!(ex.xor(&ey), exy);
            }
        }
    }

    #[test]
    fn secded_exhaustive_single_correction_double_detection() {
        for d in 1..=8usize {
            let total = d + hamming_r(d as u32) as usize + 1;
            for x in 0u64..(1 << d) {
                let data = Bits::from_u64(x, d);
                let cw = secded_encode(&data).unwrap();
                let (dec, st) = secded_decode(&cw).unwrap();
                assert_eq!((dec.to_u64(), st), (x, DecodeStatus::NoError));
                for i in 0..total {
                    let mut c1 = cw.clone();
                    c1.flip(i);
                    let (dec, st) = secded_decode(&c1).unwrap();
                    assert_eq!(st, DecodeStatus::CorrectedSingle, "d={} x={} i={}", d, x, i);
                    assert_eq!(dec.to_u64(), x, "miscorrected d={} x={} i={}", d, x, i);
                    for j in i + 1..total {
                        let mut c2 = c1.clone();
                        c2.flip(j);
                        let (_, st) = secded_decode(&c2).unwrap();
                        assert_eq!(st, DecodeStatus::DetectedDouble, "d={} x={} i={} j={}", d, x, i, j);
                    }
                }
            }
        }
    }

    #[test]
    fn parity_detects_odd_faults() {
        for x in 0u64..16 {
            let cw = parity_encode(&Bits::from_u64(x, 4)).unwrap();
            assert_eq!(parity_check(&cw).unwrap().1, DecodeStatus::NoError);
            for mask in 1u64..32 {
                let faulty = cw.xor(&Bits::from_u64(mask, 5));
                let (_, st) = parity_check(&faulty).unwrap();
                let expected = if mask.count_ones() % 2 == 1 {
                    DecodeStatus::Mismatch
                } else {
                    DecodeStatus::NoError
                };
                assert_eq!(st, expected, "x={} mask={:b}", x, mask);
            }
        }
    }

    #[test]
    fn ded_detects_up_to_two() {
        for x in 0u64..16 {
            let cw = ded_encode(&Bits::from_u64(x, 4)).unwrap();
            assert_eq!(ded_check(&cw).unwrap().1, DecodeStatus::NoError);
            let total = cw.len();
            for mask in 1u64..(1 << total) {
                if mask.count_ones() <= 2 {
                    let faulty = cw.xor(&Bits::from_u64(mask, total));
                    assert_eq!(ded_check(&faulty).unwrap().1, DecodeStatus::Mismatch);
                }
            }
        }
    }

    #[test]
    fn dmr_flags_any_mismatch() {
        for x in 0u64..16 {
            let a = Bits::from_u64(x, 4);
            assert_eq!(dmr_check(&a, &a).unwrap().1, DecodeStatus::NoError);
            for e in 1u64..16 {
                let b = a.xor(&Bits::from_u64(e, 4));
                assert_eq!(dmr_check(&a, &b).unwrap().1, DecodeStatus::Mismatch);
            }
        }
        assert!(dmr_check(&Bits::zeros(3), &Bits::zeros(4)).is_err());
    }

    #[test]
    fn tmr_corrects_any_single_copy_corruption() {
        for x in 0u64..(1 << 6) {
            let v = Bits::from_u64(x, 6);
            let (out, st) = tmr_vote(&v, &v, &v).unwrap();
            assert_eq!((out.to_u64(), st), (x, DecodeStatus::NoError));
            for e in 1u64..(1 << 6) {
                let bad = v.xor(&Bits::from_u64(e, 6));
                for (a, b, c) in [(&bad, &v, &v), (&v, &bad, &v), (&v, &v, &bad)] {
                    let (out, st) = tmr_vote(a, b, c).unwrap();
                    assert_eq!(out.to_u64(), x, "x={} e={}", x, e);
                    assert_eq!(st, DecodeStatus::Mismatch);
                }
            }
        }
    }
}
