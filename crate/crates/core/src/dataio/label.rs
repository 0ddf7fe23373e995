use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Number of personality classes in all-dimensions mode (3^5).
pub const ALL_DIMS_CLASSES: usize = 243;

/// Big-Five dimension, in the fixed order O, C, E, A, N.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Dimension {
    O,
    C,
    E,
    A,
    N,
}

impl Dimension {
    pub const ALL: [Dimension; 5] = [Self::O, Self::C, Self::E, Self::A, Self::N];

    pub fn position(self) -> usize {
        self as usize
    }

    pub fn letter(self) -> char {
        ['O', 'C', 'E', 'A', 'N'][self.position()]
    }
}

impl FromStr for Dimension {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "O" => Ok(Self::O),
            "C" => Ok(Self::C),
            "E" => Ok(Self::E),
            "A" => Ok(Self::A),
            "N" => Ok(Self::N),
            other => Err(Error::Config(format!("unknown personality dimension {other:?}"))),
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

/// Bin names used in file names and reports.
pub const BIN_NAMES: [&str; 3] = ["low", "medium", "high"];

/// Five ternary bins ordered (O, C, E, A, N); 0 = low, 1 = medium, 2 = high.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PersonalityProfile {
    bins: [u8; 5],
}

impl PersonalityProfile {
    pub fn new(bins: [u8; 5]) -> Result<Self> {
        if let Some(b) = bins.iter().find(|&&b| b > 2) {
            return Err(Error::Contract(format!("personality bin {b} outside 0..=2")));
        }
        Ok(Self { bins })
    }

    pub fn bins(&self) -> [u8; 5] {
        self.bins
    }

    pub fn bin(&self, d: Dimension) -> u8 {
        self.bins[d.position()]
    }
}

impl fmt::Display for PersonalityProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = Dimension::ALL
            .iter()
            .map(|d| format!("{}={}", d, self.bin(*d)))
            .collect();
        write!(f, "{}", parts.join(","))
    }
}

impl FromStr for PersonalityProfile {
    type Err = Error;

    /// Parses `O=2,C=1,E=0,A=1,N=2`; every dimension must appear once.
    fn from_str(s: &str) -> Result<Self> {
        let mut bins = [None; 5];
        for part in s.split(',') {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected DIM=BIN, got {part:?}")))?;
            let d: Dimension = k.parse()?;
            let b: u8 = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad bin value {v:?} for {d}")))?;
            if bins[d.position()].replace(b).is_some() {
                return Err(Error::Config(format!("dimension {d} given twice")));
            }
        }
        let mut out = [0u8; 5];
        for (i, b) in bins.iter().enumerate() {
            out[i] = b.ok_or_else(|| Error::Config(format!("missing dimension {}", Dimension::ALL[i])))?;
        }
        Self::new(out).map_err(|e| Error::Config(e.to_string()))
    }
}

/// How personality enters the model as a class label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LabelMode {
    AllDims,
    SingleDim(Dimension),
}

impl LabelMode {
    pub fn num_classes(self) -> usize {
        match self {
            Self::AllDims => ALL_DIMS_CLASSES,
            Self::SingleDim(_) => 3,
        }
    }
}

impl fmt::Display for LabelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::AllDims => write!(f, "all_dims"),
            Self::SingleDim(d) => write!(f, "single_dim:{d}"),
        }
    }
}

impl FromStr for LabelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "all_dims" {
            return Ok(Self::AllDims);
        }
        match s.strip_prefix("single_dim:") {
            Some(d) => Ok(Self::SingleDim(d.parse()?)),
            None => Err(Error::Config(format!(
                "mode must be all_dims or single_dim:<O|C|E|A|N>, got {s:?}"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ClassLabel {
    pub mode: LabelMode,
    pub index: usize,
}

impl ClassLabel {
    pub fn new(mode: LabelMode, index: usize) -> Result<Self> {
        let len = mode.num_classes();
        if index >= len {
            return Err(Error::InvalidIndex { index, len });
        }
        Ok(Self { mode, index })
    }
}

/// Integer-encodes a profile: base 3 with O most significant in
/// all-dimensions mode, the single bin otherwise.
pub fn encode_label(profile: &PersonalityProfile, mode: LabelMode) -> ClassLabel {
    let index = match mode {
        LabelMode::AllDims => profile.bins.iter().fold(0usize, |acc, &b| acc * 3 + b as usize),
        LabelMode::SingleDim(d) => profile.bin(d) as usize,
    };
    ClassLabel { mode, index }
}

/// Inverse of [`encode_label`] in all-dimensions mode.
pub fn decode_label(index: usize) -> Result<PersonalityProfile> {
    if index >= ALL_DIMS_CLASSES {
        return Err(Error::InvalidIndex {
            index,
            len: ALL_DIMS_CLASSES,
        });
    }
    let mut bins = [0u8; 5];
    let mut rest = index;
    for b in bins.iter_mut().rev() {
        *b = (rest % 3) as u8;
        rest /= 3;
    }
    PersonalityProfile::new(bins)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(b: [u8; 5]) -> PersonalityProfile {
        PersonalityProfile::new(b).unwrap()
    }

    #[test]
    fn encode_examples() {
        assert_eq!(encode_label(&p([0; 5]), LabelMode::AllDims).index, 0);
        assert_eq!(encode_label(&p([2; 5]), LabelMode::AllDims).index, 242);
        assert_eq!(encode_label(&p([1, 0, 2, 0, 1]), LabelMode::AllDims).index, 100);
        assert_eq!(
            encode_label(&p([1, 0, 2, 0, 1]), LabelMode::SingleDim(Dimension::E)).index,
            2
        );
    }

    #[test]
    fn bijection_over_all_profiles() {
        let mut seen = [false; ALL_DIMS_CLASSES];
        for o in 0..3 {
            for c in 0..3 {
                for e in 0..3 {
                    for a in 0..3 {
                        for n in 0..3 {
                            let prof = p([o, c, e, a, n]);
                            let idx = encode_label(&prof, LabelMode::AllDims).index;
                            // positional weights 81, 27, 9, 3, 1
                            let oracle = 81 * o as usize + 27 * c as usize + 9 * e as usize + 3 * a as usize + n as usize;
                            assert_eq!(idx, oracle);
                            assert!(!seen[idx]);
                            seen[idx] = true;
                            assert_eq!(decode_label(idx).unwrap(), prof);
                        }
                    }
                }
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn profile_parsing() {
        let prof: PersonalityProfile = "O=2,C=1,E=0,A=1,N=2".parse().unwrap();
        assert_eq!(prof.bins(), [2, 1, 0, 1, 2]);
        assert_eq!(encode_label(&prof, LabelMode::AllDims).index, 194);
        assert_eq!(prof.to_string(), "O=2,C=1,E=0,A=1,N=2");
        assert!("O=2,C=1,E=0,A=1".parse::<PersonalityProfile>().is_err());
        assert!("O=3,C=1,E=0,A=1,N=0".parse::<PersonalityProfile>().is_err());
        assert!("O=1,O=1,C=1,E=0,A=1,N=0".parse::<PersonalityProfile>().is_err());
    }

    #[test]
    fn invalid_bins_and_labels() {
        assert!(PersonalityProfile::new([0, 0, 3, 0, 0]).is_err());
        assert!(ClassLabel::new(LabelMode::SingleDim(Dimension::A), 3).is_err());
        assert!(ClassLabel::new(LabelMode::AllDims, 242).is_ok());
        assert!(decode_label(243).is_err());
    }

    #[test]
    fn mode_round_trip() {
        for m in ["all_dims", "single_dim:O", "single_dim:N"] {
            assert_eq!(m.parse::<LabelMode>().unwrap().to_string(), m);
        }
        assert!("single_dim:X".parse::<LabelMode>().is_err());
    }
}
