use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The eight RF1024-style classes. The discriminant is the stable label code.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u16)]
pub enum ModScheme {
    /// 16-QAM, root-raised-cosine shaped.
    Qam16 = 0,
    /// Binary continuous-phase FSK.
    Fsk2 = 1,
    /// Analog FM with a random band-limited message.
    Fm = 2,
    /// Gaussian minimum-shift keying.
    Gmsk = 3,
    /// QPSK-loaded OFDM with cyclic prefix.
    Ofdm = 4,
    /// 4-ary continuous-phase FSK.
    Fsk4 = 5,
    /// Axis-aligned, differentially encoded 4-PSK.
    Psk4 = 6,
    /// Gray-coded QPSK on the diagonal (π/4-offset) constellation.
    Qpsk = 7,
}

impl ModScheme {
    pub const ALL: [ModScheme; 8] = [
        ModScheme::Qam16,
        ModScheme::Fsk2,
        ModScheme::Fm,
        ModScheme::Gmsk,
        ModScheme::Ofdm,
        ModScheme::Fsk4,
        ModScheme::Psk4,
        ModScheme::Qpsk,
    ];

    pub fn code(self) -> u16 {
        self as u16
    }

    pub fn from_code(code: u16) -> Result<Self> {
        Self::ALL
            .get(code as usize)
            .copied()
            .ok_or_else(|| Error::invalid(format!("unknown modulation code {code}")))
    }

    pub fn name(self) -> &'static str {
        match self {
            ModScheme::Qam16 => "qam16",
            ModScheme::Fsk2 => "fsk2",
            ModScheme::Fm => "fm",
            ModScheme::Gmsk => "gmsk",
            ModScheme::Ofdm => "ofdm",
            ModScheme::Fsk4 => "fsk4",
            ModScheme::Psk4 => "psk4",
            ModScheme::Qpsk => "qpsk",
        }
    }
}

/// The eleven RadioML2016.10a classes, reproduced synthetically.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u16)]
pub enum RadioMlScheme {
    Qpsk = 0,
    Psk8 = 1,
    Qam16 = 2,
    Qam64 = 3,
    Cpfsk = 4,
    Gfsk = 5,
    Pam4 = 6,
    Wbfm = 7,
    AmSsb = 8,
    Bpsk = 9,
    AmDsb = 10,
}

impl RadioMlScheme {
    pub const ALL: [RadioMlScheme; 11] = [
        RadioMlScheme::Qpsk,
        RadioMlScheme::Psk8,
        RadioMlScheme::Qam16,
        RadioMlScheme::Qam64,
        RadioMlScheme::Cpfsk,
        RadioMlScheme::Gfsk,
        RadioMlScheme::Pam4,
        RadioMlScheme::Wbfm,
        RadioMlScheme::AmSsb,
        RadioMlScheme::Bpsk,
        RadioMlScheme::AmDsb,
    ];

    pub fn code(self) -> u16 {
        self as u16
    }

    pub fn name(self) -> &'static str {
        match self {
            RadioMlScheme::Qpsk => "QPSK",
            RadioMlScheme::Psk8 => "8PSK",
            RadioMlScheme::Qam16 => "QAM16",
            RadioMlScheme::Qam64 => "QAM64",
            RadioMlScheme::Cpfsk => "CPFSK",
            RadioMlScheme::Gfsk => "GFSK",
            RadioMlScheme::Pam4 => "PAM4",
            RadioMlScheme::Wbfm => "WBFM",
            RadioMlScheme::AmSsb => "AM-SSB",
            RadioMlScheme::Bpsk => "BPSK",
            RadioMlScheme::AmDsb => "AM-DSB",
        }
    }
}

/// Any waveform the synthesizer can produce.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Modulation {
    Rf1024(ModScheme),
    RadioMl(RadioMlScheme),
}

impl Modulation {
    /// The eight RF1024-style classes in label order.
    pub fn rf1024() -> Vec<Modulation> {
        ModScheme::ALL.iter().map(|&s| Modulation::Rf1024(s)).collect()
    }

    /// The eleven RadioML classes in label order.
    pub fn radioml() -> Vec<Modulation> {
        RadioMlScheme::ALL.iter().map(|&s| Modulation::RadioMl(s)).collect()
    }

    pub fn name(self) -> &'static str {
        match self {
            Modulation::Rf1024(s) => s.name(),
            Modulation::RadioMl(s) => s.name(),
        }
    }

    pub fn code(self) -> u16 {
        match self {
            Modulation::Rf1024(s) => s.code(),
            Modulation::RadioMl(s) => s.code(),
        }
    }

    /// Parse a comma-separated class list; `rf1024` and `radioml` expand to
    /// the full sets.
    pub fn parse_list(list: &str) -> Result<Vec<Modulation>> {
        let mut out = Vec::new();
        for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item.to_ascii_lowercase().as_str() {
                "rf1024" => out.extend(Self::rf1024()),
                "radioml" => out.extend(Self::radioml()),
                _ => out.push(item.parse()?),
            }
        }
        if out.is_empty() {
            return Err(Error::invalid("empty class list"));
        }
        Ok(out)
    }
}

impl From<ModScheme> for Modulation {
    fn from(s: ModScheme) -> Self {
        Modulation::Rf1024(s)
    }
}

impl From<RadioMlScheme> for Modulation {
    fn from(s: RadioMlScheme) -> Self {
        Modulation::RadioMl(s)
    }
}

impl fmt::Display for Modulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Modulation {
    type Err = Error;

    /// RadioML names are matched exactly (upper case); RF1024 names
    /// case-insensitively.
    fn from_str(s: &str) -> Result<Self> {
        if let Some(r) = RadioMlScheme::ALL.iter().find(|r| r.name() == s) {
            return Ok(Modulation::RadioMl(*r));
        }
        let lower = s.to_ascii_lowercase();
        ModScheme::ALL
            .iter()
            .find(|m| m.name() == lower)
            .map(|&m| Modulation::Rf1024(m))
            .ok_or_else(|| Error::invalid(format!("unknown modulation {s:?}")))
    }
}
