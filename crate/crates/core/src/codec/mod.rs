//! Systematic `[n, k]` Reed–Solomon code over GF(256).
//!
//! Server `i` (1-based) is assigned the evaluation point `i - 1`. Fragment
//! `i` of a value `v = v_1 ‖ … ‖ v_k` is `q(i - 1)`, where `q` is the unique
//! polynomial of degree `< k` with `q(j - 1) = v_j` for `j ≤ k`. The first `k`
//! fragments are therefore the slices of `v` themselves, and any `k`
//! fragments determine `q` (and so `v`) because distinct evaluation points
//! give an invertible Vandermonde system.

pub mod gf256;

use crate::types::{CodedElement, Value};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    #[error("invalid code parameters n={n}, k={k}: need 1 <= k <= n <= 255")]
    InvalidParams { n: usize, k: usize },
    #[error("value length {len} is not divisible by k={k}")]
    NotDivisible { len: usize, k: usize },
    #[error("fragment index {index} out of range 1..={n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("not enough fragments: have {have}, need {need}")]
    NotEnoughFragments { have: usize, need: usize },
    #[error("malformed fragments: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodecParams {
    pub n: usize,
    pub k: usize,
}

impl CodecParams {
    pub fn new(n: usize, k: usize) -> Result<Self, CodecError> {
        if k == 0 || k > n || n > 255 {
            return Err(CodecError::InvalidParams { n, k });
        }
        Ok(Self { n, k })
    }
}

/// Encoder/decoder for one `(n, k)` pair. Holds the `n × k` generator matrix
/// whose top `k × k` block is the identity.
#[derive(Debug, Clone)]
pub struct Codec {
    params: CodecParams,
    generator: Vec<Vec<u8>>,
}

impl Codec {
    pub fn new(params: CodecParams) -> Result<Self, CodecError> {
        let CodecParams { n, k } = CodecParams::new(params.n, params.k)?;
        let vandermonde: Vec<Vec<u8>> = (0..n)
            .map(|i| {
                let x = i as u8;
                let mut row = Vec::with_capacity(k);
                let mut p = 1u8;
                for _ in 0..k {
                    row.push(p);
                    p = gf256::mul(p, x);
                }
                row
            })
            .collect();
        let top_inv = gf256::invert(vandermonde[..k].to_vec())
            .expect("Vandermonde block over distinct points is invertible");
        let generator = vandermonde
            .iter()
            .map(|row| {
                (0..k)
                    .map(|c| {
                        (0..k).fold(0u8, |acc, j| gf256::add(acc, gf256::mul(row[j], top_inv[j][c])))
                    })
                    .collect()
            })
            .collect();
        Ok(Self { params: CodecParams { n, k }, generator })
    }

    pub fn params(&self) -> CodecParams {
        self.params
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    pub fn k(&self) -> usize {
        self.params.k
    }

    fn slices<'a>(&self, v: &'a Value) -> Result<Vec<&'a [u8]>, CodecError> {
        let k = self.params.k;
        if !v.len().is_multiple_of(k) {
            return Err(CodecError::NotDivisible { len: v.len(), k });
        }
        let width = v.len() / k;
        if width == 0 {
            return Ok(vec![&[][..]; k]);
        }
        Ok(v.as_bytes().chunks(width).collect())
    }

    fn row_combination(&self, row: &[u8], inputs: &[&[u8]], width: usize) -> Vec<u8> {
        let mut out = vec![0u8; width];
        for (c, input) in row.iter().zip(inputs) {
            gf256::mul_add_into(&mut out, *c, input);
        }
        out
    }

    /// All `n` coded elements of `v`.
    pub fn encode(&self, v: &Value) -> Result<Vec<CodedElement>, CodecError> {
        let slices = self.slices(v)?;
        let width = v.len() / self.params.k;
        Ok(self
            .generator
            .iter()
            .enumerate()
            .map(|(i, row)| CodedElement::new(i + 1, self.row_combination(row, &slices, width)))
            .collect())
    }

    /// Coded element `index` of `v`, without computing the others.
    pub fn project(&self, v: &Value, index: usize) -> Result<CodedElement, CodecError> {
        self.check_index(index)?;
        let slices = self.slices(v)?;
        let width = v.len() / self.params.k;
        if index <= self.params.k {
            return Ok(CodedElement::new(index, slices[index - 1].to_vec()));
        }
        Ok(CodedElement::new(
            index,
            self.row_combination(&self.generator[index - 1], &slices, width),
        ))
    }

    fn check_index(&self, index: usize) -> Result<(), CodecError> {
        if index == 0 || index > self.params.n {
            return Err(CodecError::IndexOutOfRange { index, n: self.params.n });
        }
        Ok(())
    }

    /// Recovers the value from at least `k` fragments with distinct indices.
    pub fn decode(&self, fragments: &[CodedElement]) -> Result<Value, CodecError> {
        let k = self.params.k;
        let chosen = self.validate(fragments)?;
        let width = chosen[0].len();
        if chosen.iter().all(|f| f.index <= k) {
            // Systematic fragments: the value is their concatenation.
            let mut out = Vec::with_capacity(width * k);
            for f in &chosen {
                out.extend_from_slice(&f.bytes);
            }
            return Ok(Value::new(out));
        }
        let sub: Vec<Vec<u8>> = chosen.iter().map(|f| self.generator[f.index - 1].clone()).collect();
        let inverse = gf256::invert(sub).ok_or_else(|| {
            CodecError::Malformed("fragment rows are linearly dependent".to_string())
        })?;
        let inputs: Vec<&[u8]> = chosen.iter().map(|f| &f.bytes[..]).collect();
        let mut out = Vec::with_capacity(width * k);
        for row in &inverse {
            out.extend(self.row_combination(row, &inputs, width));
        }
        Ok(Value::new(out))
    }

    /// Picks `k` fragments (lowest indices first) after checking the input.
    fn validate<'a>(&self, fragments: &'a [CodedElement]) -> Result<Vec<&'a CodedElement>, CodecError> {
        let k = self.params.k;
        if fragments.len() < k {
            return Err(CodecError::NotEnoughFragments { have: fragments.len(), need: k });
        }
        let mut sorted: Vec<&CodedElement> = fragments.iter().collect();
        sorted.sort_by_key(|f| f.index);
        for f in &sorted {
            self.check_index(f.index)?;
        }
        if sorted.windows(2).any(|w| w[0].index == w[1].index) {
            return Err(CodecError::Malformed("duplicate fragment index".to_string()));
        }
        let width = sorted[0].len();
        if sorted.iter().any(|f| f.len() != width) {
            return Err(CodecError::Malformed("fragment lengths differ".to_string()));
        }
        sorted.truncate(k);
        Ok(sorted)
    }

    /// Coded element `target` of the value the fragments encode.
    pub fn re_encode(&self, fragments: &[CodedElement], target: usize) -> Result<CodedElement, CodecError> {
        self.check_index(target)?;
        self.validate(fragments)?;
        if let Some(f) = fragments.iter().find(|f| f.index == target) {
            return Ok(f.clone());
        }
        let v = self.decode(fragments)?;
        self.project(&v, target)
    }
}
