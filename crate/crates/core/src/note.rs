//! Note names and pitch arithmetic.
//!
//! Chromatic pitches are always spelled with sharps, and octaves follow
//! scientific pitch notation (C4 = MIDI 60).

use std::fmt;

/// Reference pitch for MIDI 69.
pub const A4_HZ: f64 = 440.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PitchError {
    #[error("frequency must be positive, got {0}")]
    NonPositiveFrequency(f64),
    #[error("MIDI number {0} outside 0..=127")]
    MidiOutOfRange(i64),
}

/// Pitch letter, lower-case as MEI writes it in `@pname`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PitchName {
    C,
    D,
    E,
    F,
    G,
    A,
    B,
}

impl PitchName {
    pub fn as_str(self) -> &'static str {
        match self {
            PitchName::C => "c",
            PitchName::D => "d",
            PitchName::E => "e",
            PitchName::F => "f",
            PitchName::G => "g",
            PitchName::A => "a",
            PitchName::B => "b",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "c" => PitchName::C,
            "d" => PitchName::D,
            "e" => PitchName::E,
            "f" => PitchName::F,
            "g" => PitchName::G,
            "a" => PitchName::A,
            "b" => PitchName::B,
            _ => return None,
        })
    }

    /// Semitones above C within the octave.
    fn pitch_class(self) -> i64 {
        match self {
            PitchName::C => 0,
            PitchName::D => 2,
            PitchName::E => 4,
            PitchName::F => 5,
            PitchName::G => 7,
            PitchName::A => 9,
            PitchName::B => 11,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Accidental {
    Natural,
    Sharp,
    Flat,
}

impl Accidental {
    /// MEI `data.ACCIDENTAL.gestural` code, `None` for naturals (attribute omitted).
    pub fn mei_code(self) -> Option<&'static str> {
        match self {
            Accidental::Natural => None,
            Accidental::Sharp => Some("s"),
            Accidental::Flat => Some("f"),
        }
    }

    pub fn from_mei_code(code: &str) -> Option<Self> {
        match code {
            "n" => Some(Accidental::Natural),
            "s" => Some(Accidental::Sharp),
            "f" => Some(Accidental::Flat),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Accidental::Natural => "natural",
            Accidental::Sharp => "sharp",
            Accidental::Flat => "flat",
        }
    }

    fn offset(self) -> i64 {
        match self {
            Accidental::Natural => 0,
            Accidental::Sharp => 1,
            Accidental::Flat => -1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NoteName {
    pub pname: PitchName,
    pub accidental: Accidental,
    pub octave: i32,
}

impl NoteName {
    pub fn new(pname: PitchName, accidental: Accidental, octave: i32) -> Self {
        NoteName {
            pname,
            accidental,
            octave,
        }
    }

    /// MIDI number of this spelling, if it falls inside 0..=127.
    pub fn midi(&self) -> Result<u8, PitchError> {
        let m = (self.octave as i64 + 1) * 12 + self.pname.pitch_class() + self.accidental.offset();
        if (0..=127).contains(&m) {
            Ok(m as u8)
        } else {
            Err(PitchError::MidiOutOfRange(m))
        }
    }
}

impl fmt::Display for NoteName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let acc = match self.accidental {
            Accidental::Natural => "",
            Accidental::Sharp => "#",
            Accidental::Flat => "b",
        };
        write!(
            f,
            "{}{}{}",
            self.pname.as_str().to_uppercase(),
            acc,
            self.octave
        )
    }
}

/// Fractional MIDI number of a frequency.
pub fn midi_from_hz(f: f64) -> Result<f64, PitchError> {
    if !(f > 0.0) || !f.is_finite() {
        return Err(PitchError::NonPositiveFrequency(f));
    }
    Ok(69.0 + 12.0 * (f / A4_HZ).log2())
}

pub fn hz_from_midi(m: f64) -> f64 {
    A4_HZ * 2f64.powf((m - 69.0) / 12.0)
}

const SHARP_SPELLING: [(PitchName, Accidental); 12] = [
    (PitchName::C, Accidental::Natural),
    (PitchName::C, Accidental::Sharp),
    (PitchName::D, Accidental::Natural),
    (PitchName::D, Accidental::Sharp),
    (PitchName::E, Accidental::Natural),
    (PitchName::F, Accidental::Natural),
    (PitchName::F, Accidental::Sharp),
    (PitchName::G, Accidental::Natural),
    (PitchName::G, Accidental::Sharp),
    (PitchName::A, Accidental::Natural),
    (PitchName::A, Accidental::Sharp),
    (PitchName::B, Accidental::Natural),
];

pub fn note_name_from_midi(m: i64) -> Result<NoteName, PitchError> {
    if !(0..=127).contains(&m) {
        return Err(PitchError::MidiOutOfRange(m));
    }
    let (pname, accidental) = SHARP_SPELLING[(m % 12) as usize];
    Ok(NoteName::new(pname, accidental, (m / 12) as i32 - 1))
}

/// Nearest equal-tempered note to a frequency.
pub fn note_name_from_hz(f: f64) -> Result<NoteName, PitchError> {
    let m = midi_from_hz(f)?.round();
    if !(0.0..=127.0).contains(&m) {
        return Err(PitchError::MidiOutOfRange(m as i64));
    }
    note_name_from_midi(m as i64)
}

/// Interval from `f1` to `f2` in cents.
pub fn cents_between(f1: f64, f2: f64) -> Result<f64, PitchError> {
    for f in [f1, f2] {
        if !(f > 0.0) || !f.is_finite() {
            return Err(PitchError::NonPositiveFrequency(f));
        }
    }
    Ok(1200.0 * (f2 / f1).log2())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn midi_reference_points() {
        assert_eq!(midi_from_hz(440.0).unwrap(), 69.0);
        assert!((midi_from_hz(261.6256).unwrap() - 60.0).abs() < 1e-3);
        assert!((midi_from_hz(466.1638).unwrap() - 70.0).abs() < 1e-3);
        assert!(midi_from_hz(0.0).is_err());
        assert!(midi_from_hz(-3.0).is_err());
    }

    #[test]
    fn names_from_midi() {
        assert_eq!(
            note_name_from_midi(69).unwrap(),
            NoteName::new(PitchName::A, Accidental::Natural, 4)
        );
        assert_eq!(
            note_name_from_midi(70).unwrap(),
            NoteName::new(PitchName::A, Accidental::Sharp, 4)
        );
        assert_eq!(
            note_name_from_midi(60).unwrap(),
            NoteName::new(PitchName::C, Accidental::Natural, 4)
        );
        assert_eq!(note_name_from_midi(0).unwrap().octave, -1);
        assert_eq!(note_name_from_midi(127).unwrap().octave, 9);
        assert!(note_name_from_midi(128).is_err());
        assert!(note_name_from_midi(-1).is_err());
    }

    #[test]
    fn cents() {
        assert_eq!(cents_between(440.0, 440.0).unwrap(), 0.0);
        assert!((cents_between(440.0, 466.1638).unwrap() - 100.0).abs() < 0.01);
        assert!((cents_between(440.0, 880.0).unwrap() - 1200.0).abs() < 1e-12);
        assert!(cents_between(0.0, 440.0).is_err());
    }

    #[test]
    fn flat_spelling_maps_to_midi() {
        let bb = NoteName::new(PitchName::B, Accidental::Flat, 4);
        assert_eq!(bb.midi().unwrap(), 70);
        assert_eq!(bb.to_string(), "Bb4");
    }

    #[test]
    fn every_midi_round_trips() {
        for m in 0..=127i64 {
            let hz = 440.0 * 2f64.powf((m as f64 - 69.0) / 12.0);
            assert!((midi_from_hz(hz).unwrap() - m as f64).abs() < 1e-6);
            let name = note_name_from_midi(m).unwrap();
            assert!((-1..=9).contains(&name.octave));
            assert_eq!(name.midi().unwrap() as i64, m);
        }
    }

    proptest! {
        #[test]
        fn cents_antisymmetric(f1 in 1.0f64..20_000.0, f2 in 1.0f64..20_000.0) {
            let a = cents_between(f1, f2).unwrap();
            let b = cents_between(f2, f1).unwrap();
            prop_assert!((a + b).abs() < 1e-9);
        }
    }
}
