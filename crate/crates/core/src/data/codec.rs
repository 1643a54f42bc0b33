//! Text label encoding: character indices with GO/EOS/PAD specials.

use crate::error::DataError;
use std::collections::HashMap;
use std::path::Path;

pub const GO: usize = 0;
pub const EOS: usize = 1;
pub const PAD: usize = 2;
pub const NUM_SPECIALS: usize = 3;

#[derive(Clone, Debug)]
pub struct CharsetCodec {
    chars: Vec<char>,
    index: HashMap<char, usize>,
    pub max_len: usize,
}

impl CharsetCodec {
    pub fn new(chars: Vec<char>, max_len: usize) -> Self {
        let index = chars
            .iter()
            .enumerate()
            .map(|(i, &c)| (c, i + NUM_SPECIALS))
            .collect();
        Self {
            chars,
            index,
            max_len,
        }
    }

    /// Lowercase, uppercase, digits; decoder length cap 25.
    pub fn default_alphanumeric() -> Self {
        let chars = ('a'..='z').chain('A'..='Z').chain('0'..='9').collect();
        Self::new(chars, 25)
    }

    /// One character per line, order significant.
    pub fn from_file(path: &Path, max_len: usize) -> Result<Self, DataError> {
        let text = std::fs::read_to_string(path)?;
        let chars: Vec<char> = text.lines().filter_map(|l| l.chars().next()).collect();
        Ok(Self::new(chars, max_len))
    }

    /// Class count including the three specials.
    pub fn vocab_size(&self) -> usize {
        self.chars.len() + NUM_SPECIALS
    }

    pub fn charset(&self) -> &[char] {
        &self.chars
    }

    pub fn contains(&self, c: char) -> bool {
        self.index.contains_key(&c)
    }

    /// Body character indices, EOS, then PAD out to `max_len` slots.
    pub fn encode(&self, text: &str) -> Result<Vec<usize>, DataError> {
        let n = text.chars().count();
        if n > self.max_len - 1 {
            return Err(DataError::TooLong(n, self.max_len - 1));
        }
        let mut out = Vec::with_capacity(self.max_len);
        for c in text.chars() {
            let &i = self.index.get(&c).ok_or(DataError::UnknownChar(c))?;
            out.push(i);
        }
        out.push(EOS);
        out.resize(self.max_len, PAD);
        Ok(out)
    }

    /// Characters up to the first EOS; specials never decode to text.
    pub fn decode(&self, ids: &[usize]) -> String {
        let mut s = String::new();
        for &i in ids {
            if i == EOS {
                break;
            }
            if i >= NUM_SPECIALS {
                if let Some(&c) = self.chars.get(i - NUM_SPECIALS) {
                    s.push(c);
                }
            }
        }
        s
    }

    /// Number of supervised steps for an encoded label: body plus EOS.
    pub fn step_count(encoded: &[usize]) -> usize {
        encoded
            .iter()
            .position(|&i| i == EOS)
            .map(|p| p + 1)
            .unwrap_or(encoded.len())
    }
}
