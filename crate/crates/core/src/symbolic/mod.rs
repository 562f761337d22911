//! Binary itineraries, coding against the pair `{U0, U1}`, and the two
//! symbol-frequency classifiers.

mod classify;
mod coding;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use classify::{
    classify_majority, classify_one_filling, majority_profile, majority_window, one_filling_profile,
    Classification, Verdict, ONE_FILLING_TOL,
};
pub use coding::{continuation, decode, encode, orbit_from_code, Decoded};

/// Rule producing `v_j` for every integer `j`.
#[derive(Clone)]
pub enum Generator {
    Zeros,
    Ones,
    /// `v_j = word[j mod len]`.
    Periodic(Vec<u8>),
    /// For `j >= 0`: blocks `0^(b^k) 1^(b^k)` for `k = 0, 1, 2, ...`;
    /// ones for `j < 0`.
    Blocks(u64),
    /// `v_j = 0` iff `j >= 0` is a perfect square.
    Squares,
    /// `window` on `[start, start + len)`, `base` elsewhere.
    Override { start: i64, window: Vec<u8>, base: Box<Generator> },
    /// `v_j = base(j + k)`.
    Shift(Box<Generator>, i64),
    Custom(Arc<dyn Fn(i64) -> u8 + Send + Sync>),
}

impl fmt::Debug for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Generator::Zeros => f.write_str("Zeros"),
            Generator::Ones => f.write_str("Ones"),
            Generator::Periodic(w) => write!(f, "Periodic({})", word_string(w)),
            Generator::Blocks(b) => write!(f, "Blocks({b})"),
            Generator::Squares => f.write_str("Squares"),
            Generator::Override { start, window, base } => {
                write!(f, "Override({start}, {}, {base:?})", word_string(window))
            }
            Generator::Shift(g, k) => write!(f, "Shift({g:?}, {k})"),
            Generator::Custom(_) => f.write_str("Custom"),
        }
    }
}

fn word_string(w: &[u8]) -> String {
    w.iter().map(|&s| if s == 0 { '0' } else { '1' }).collect()
}

fn is_square(j: i64) -> bool {
    if j < 0 {
        return false;
    }
    let r = (j as f64).sqrt() as i64;
    (r.saturating_sub(1)..=r + 1).any(|s| s >= 0 && s * s == j)
}

impl Generator {
    pub fn symbol(&self, j: i64) -> u8 {
        match self {
            Generator::Zeros => 0,
            Generator::Ones => 1,
            Generator::Periodic(w) => w[j.rem_euclid(w.len() as i64) as usize],
            Generator::Blocks(b) => {
                if j < 0 {
                    return 1;
                }
                let mut rest = j as u64;
                let mut len = 1u64;
                loop {
                    if rest < len {
                        return 0;
                    }
                    if rest < 2 * len {
                        return 1;
                    }
                    rest -= 2 * len;
                    len = len.saturating_mul(*b);
                }
            }
            Generator::Squares => {
                if j >= 0 && is_square(j) {
                    0
                } else {
                    1
                }
            }
            Generator::Override { start, window, base } => {
                let off = j - start;
                if off >= 0 && (off as usize) < window.len() {
                    window[off as usize]
                } else {
                    base.symbol(j)
                }
            }
            Generator::Shift(g, k) => g.symbol(j + k),
            Generator::Custom(f) => f(j),
        }
    }

    /// Parses `zeros`, `ones`, `squares`, `blocks[:B]` or `periodic:WORD`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "zeros" => return Ok(Generator::Zeros),
            "ones" => return Ok(Generator::Ones),
            "squares" => return Ok(Generator::Squares),
            "blocks" => return Ok(Generator::Blocks(4)),
            _ => {}
        }
        if let Some(w) = s.strip_prefix("periodic:") {
            let word = parse_word(w)?;
            if word.is_empty() {
                return Err(Error::InvalidInput("periodic word must be non-empty".into()));
            }
            return Ok(Generator::Periodic(word));
        }
        if let Some(b) = s.strip_prefix("blocks:") {
            let b: u64 = b.parse().map_err(|_| Error::InvalidInput(format!("bad block base '{b}'")))?;
            if b < 2 {
                return Err(Error::InvalidInput("block base must be at least 2".into()));
            }
            return Ok(Generator::Blocks(b));
        }
        Err(Error::InvalidInput(format!("unknown generator '{s}'")))
    }
}

fn parse_word(s: &str) -> Result<Vec<u8>> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            _ => Err(Error::InvalidInput(format!("symbol '{c}' is not 0 or 1"))),
        })
        .collect()
}

/// Two-sided itinerary: an explicit window on `[start, start + len)` and an
/// optional generator covering every other index.
#[derive(Debug, Clone)]
pub struct Code {
    start: i64,
    symbols: Vec<u8>,
    generator: Option<Generator>,
}

/// Config literal: `past` lists `v_{-len}, ..., v_{-1}` left to right and
/// `future` lists `v_0, v_1, ...`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeLiteral {
    #[serde(default)]
    pub past: String,
    #[serde(default)]
    pub future: String,
    #[serde(default)]
    pub generator: Option<String>,
}

impl Code {
    /// Window-only code.
    pub fn window(start: i64, symbols: Vec<u8>) -> Result<Self> {
        Code::new(start, symbols, None)
    }

    /// Window plus generator; they must agree on the window.
    pub fn new(start: i64, symbols: Vec<u8>, generator: Option<Generator>) -> Result<Self> {
        if let Some(bad) = symbols.iter().find(|&&s| s > 1) {
            return Err(Error::InvalidInput(format!("symbol {bad} is not 0 or 1")));
        }
        if let Some(g) = &generator {
            for (k, &s) in symbols.iter().enumerate() {
                let j = start + k as i64;
                if g.symbol(j) != s {
                    return Err(Error::InvalidInput(format!("window and generator disagree at j = {j}")));
                }
            }
        }
        Ok(Code { start, symbols, generator })
    }

    pub fn from_generator(g: Generator) -> Self {
        Code { start: 0, symbols: Vec::new(), generator: Some(g) }
    }

    /// The window of `w` extended by `base` outside it.
    pub fn extend(w: &Code, base: Generator) -> Self {
        let g = Generator::Override { start: w.start, window: w.symbols.clone(), base: Box::new(base) };
        Code { start: w.start, symbols: w.symbols.clone(), generator: Some(g) }
    }

    pub fn from_literal(lit: &CodeLiteral) -> Result<Self> {
        let past = parse_word(&lit.past)?;
        let future = parse_word(&lit.future)?;
        let start = -(past.len() as i64);
        let mut symbols = past;
        symbols.extend(future);
        let window = Code::window(start, symbols)?;
        match &lit.generator {
            None => Ok(window),
            Some(g) => {
                let g = Generator::parse(g)?;
                if window.symbols.is_empty() {
                    Ok(Code::from_generator(g))
                } else {
                    Ok(Code::extend(&window, g))
                }
            }
        }
    }

    pub fn parse_json(s: &str) -> Result<Self> {
        let lit: CodeLiteral = serde_json::from_str(s)?;
        Code::from_literal(&lit)
    }

    pub fn symbol(&self, j: i64) -> Result<u8> {
        let off = j - self.start;
        if off >= 0 && (off as usize) < self.symbols.len() {
            return Ok(self.symbols[off as usize]);
        }
        match &self.generator {
            Some(g) => Ok(g.symbol(j)),
            None => Err(Error::WindowTooShort(j)),
        }
    }

    /// Symbols on `[a, b]`.
    pub fn slice(&self, a: i64, b: i64) -> Result<Vec<u8>> {
        (a..=b).map(|j| self.symbol(j)).collect()
    }

    pub fn generator(&self) -> Option<&Generator> {
        self.generator.as_ref()
    }

    pub fn is_generator_backed(&self) -> bool {
        self.generator.is_some()
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    pub fn symbols(&self) -> &[u8] {
        &self.symbols
    }

    /// Last index covered by the window.
    pub fn end(&self) -> i64 {
        self.start + self.symbols.len() as i64 - 1
    }

    /// Shift by `k`: the new code has `v'_j = v_{j+k}`.
    pub fn shift(&self, k: i64) -> Code {
        Code {
            start: self.start - k,
            symbols: self.symbols.clone(),
            generator: self.generator.clone().map(|g| Generator::Shift(Box::new(g), k)),
        }
    }

    /// `past.future` rendering of the window.
    pub fn window_string(&self) -> String {
        let split = (-self.start).clamp(0, self.symbols.len() as i64) as usize;
        format!("{}.{}", word_string(&self.symbols[..split]), word_string(&self.symbols[split..]))
    }
}

impl PartialEq for Code {
    /// Window equality; generators are not compared.
    fn eq(&self, o: &Code) -> bool {
        self.start == o.start && self.symbols == o.symbols
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_generator_layout() {
        let g = Generator::Blocks(4);
        let got: Vec<u8> = (0..12).map(|j| g.symbol(j)).collect();
        assert_eq!(got, vec![0, 1, 0, 0, 0, 0, 1, 1, 1, 1, 0, 0]);
        assert_eq!(g.symbol(-3), 1);
        // third pair starts at 2 + 8 = 10, zeros for 16 symbols
        assert_eq!(g.symbol(25), 0);
        assert_eq!(g.symbol(26), 1);
    }

    #[test]
    fn squares_and_periodic() {
        let g = Generator::Squares;
        let zeros: Vec<i64> = (0..50).filter(|&j| g.symbol(j) == 0).collect();
        assert_eq!(zeros, vec![0, 1, 4, 9, 16, 25, 36, 49]);
        let p = Generator::parse("periodic:01").unwrap();
        assert_eq!(p.symbol(0), 0);
        assert_eq!(p.symbol(-1), 1);
        assert_eq!(p.symbol(-2), 0);
    }

    #[test]
    fn literal_parsing() {
        let c = Code::parse_json(r#"{"past": "10", "future": "011"}"#).unwrap();
        assert_eq!(c.start(), -2);
        assert_eq!(c.slice(-2, 2).unwrap(), vec![1, 0, 0, 1, 1]);
        assert!(matches!(c.symbol(3), Err(Error::WindowTooShort(3))));
        assert_eq!(c.window_string(), "10.011");

        let c = Code::parse_json(r#"{"future": "1", "generator": "squares"}"#).unwrap();
        assert_eq!(c.symbol(0).unwrap(), 1);
        assert_eq!(c.symbol(4).unwrap(), 0);

        assert!(Code::parse_json(r#"{"future": "012"}"#).is_err());
        assert!(Code::parse_json(r#"{"generator": "fibonacci"}"#).is_err());
        assert!(Code::parse_json(r#"{"futur": "01"}"#).is_err());
    }

    #[test]
    fn window_must_agree_with_generator() {
        assert!(Code::new(0, vec![0, 0], Some(Generator::Zeros)).is_ok());
        assert!(Code::new(0, vec![0, 1], Some(Generator::Zeros)).is_err());
    }

    #[test]
    fn shift_moves_indices() {
        let c = Code::from_generator(Generator::Blocks(4));
        let s = c.shift(2);
        for j in -5..40 {
            assert_eq!(s.symbol(j).unwrap(), c.symbol(j + 2).unwrap());
        }
        let w = Code::window(-1, vec![1, 0, 1]).unwrap().shift(1);
        assert_eq!(w.symbol(-2).unwrap(), 1);
        assert_eq!(w.symbol(0).unwrap(), 1);
    }
}
