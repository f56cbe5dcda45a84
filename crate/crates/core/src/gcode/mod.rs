//! Lossless Marlin-flavor G-code handling.
//!
//! A [`GCodeDocument`] keeps every input line verbatim together with its
//! terminator, so serializing an untouched document reproduces the input
//! byte for byte. Lines that a transformation rewrites are re-emitted in a
//! canonical form (see [`format`]).

mod format;
mod parse;
mod replay;

pub use format::{format_axis, format_e, format_feedrate, format_number};
pub use parse::{parse_document, parse_line, ParseError};
pub(crate) use replay::distance;
pub use replay::{
    replay, replay_with, AxisMode, MachineState, PrintMove, Replay, ReplayError, ReplayOptions,
    ToolChangeEvent, DEFAULT_ARC_TOLERANCE,
};

/// Line terminator as found in the source file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terminator {
    Lf,
    CrLf,
    /// Last line of a file without a trailing newline.
    None,
}

impl Terminator {
    pub fn as_bytes(self) -> &'static [u8] {
        match self {
            Terminator::Lf => b"\n",
            Terminator::CrLf => b"\r\n",
            Terminator::None => b"",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dialect {
    Marlin,
}

/// Semantic category of a line, derived from its first command word.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineKind {
    /// G0/G1/G2/G3.
    Motion,
    /// G90/G91/M82/M83.
    Mode,
    /// T<n>.
    ToolChange,
    /// G92.
    SetPosition,
    Other,
    /// No command words: empty, whitespace or comment only.
    CommentOnly,
}

/// A single `<letter><number>` word.
#[derive(Debug, Clone, PartialEq)]
pub struct Word {
    pub letter: char,
    /// Numeric text exactly as written in the source (or canonical text once rewritten).
    pub text: String,
    pub value: f64,
}

impl Word {
    pub fn new(letter: char, value: f64, text: String) -> Self {
        Word {
            letter,
            text,
            value,
        }
    }

    /// A bare letter such as the `X` in `G28 X`.
    pub fn is_flag(&self) -> bool {
        self.text.is_empty()
    }

    /// True when the word is `<letter><code>` for an integral code.
    pub fn is(&self, letter: char, code: u32) -> bool {
        self.letter == letter && self.value == code as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GCodeLine {
    raw: String,
    pub terminator: Terminator,
    pub words: Vec<Word>,
    /// Text after the first `;`, without the `;` itself.
    pub comment: Option<String>,
    /// Free-text argument of message commands such as `M117`.
    pub text_arg: Option<String>,
    /// `*` checksum, kept for reference only.
    pub checksum: Option<u32>,
    pub kind: LineKind,
    dirty: bool,
}

impl GCodeLine {
    /// Builds a line from words; it is always serialized canonically.
    pub fn from_words(words: Vec<Word>, comment: Option<String>, terminator: Terminator) -> Self {
        let kind = parse::classify(&words);
        let mut line = GCodeLine {
            raw: String::new(),
            terminator,
            words,
            comment,
            text_arg: None,
            checksum: None,
            kind,
            dirty: true,
        };
        line.raw = line.canonical_text();
        line
    }

    /// The source text of the line without its terminator.
    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn is_modified(&self) -> bool {
        self.dirty
    }

    /// The first command word, skipping `N` line numbers.
    pub fn command(&self) -> Option<&Word> {
        self.words.iter().find(|w| w.letter != 'N')
    }

    pub fn is_command(&self, letter: char, code: u32) -> bool {
        self.command().is_some_and(|w| w.is(letter, code))
    }

    pub fn word(&self, letter: char) -> Option<&Word> {
        // the command word itself never doubles as a parameter
        self.words
            .iter()
            .skip_while(|w| w.letter == 'N')
            .skip(1)
            .find(|w| w.letter == letter)
    }

    pub fn value(&self, letter: char) -> Option<f64> {
        self.word(letter).map(|w| w.value)
    }

    /// Replaces (or appends) a parameter word using canonical formatting for
    /// its letter and marks the line as modified.
    pub fn set_value(&mut self, letter: char, value: f64) {
        let text = format_number(letter, value);
        let value = text.parse::<f64>().unwrap_or(value);
        let start = self.words.iter().take_while(|w| w.letter == 'N').count() + 1;
        match self
            .words
            .iter_mut()
            .skip(start)
            .find(|w| w.letter == letter)
        {
            Some(w) => {
                if w.text == text {
                    return;
                }
                w.text = text;
                w.value = value;
            }
            None => self.words.push(Word::new(letter, value, text)),
        }
        self.dirty = true;
        self.raw = self.canonical_text();
    }

    pub fn set_comment(&mut self, comment: Option<String>) {
        if self.comment == comment {
            return;
        }
        self.comment = comment;
        self.dirty = true;
        self.raw = self.canonical_text();
    }

    fn canonical_text(&self) -> String {
        let mut out = String::new();
        for (i, w) in self.words.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push(w.letter);
            out.push_str(&w.text);
        }
        if let Some(arg) = &self.text_arg {
            out.push(' ');
            out.push_str(arg);
        }
        if let Some(c) = &self.comment {
            if !out.is_empty() {
                out.push(' ');
            }
            out.push(';');
            out.push_str(c);
        }
        out
    }

    pub fn write_to(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(self.raw.as_bytes());
        out.extend_from_slice(self.terminator.as_bytes());
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GCodeDocument {
    pub lines: Vec<GCodeLine>,
    pub dialect: Dialect,
}

impl Default for GCodeDocument {
    fn default() -> Self {
        GCodeDocument {
            lines: Vec::new(),
            dialect: Dialect::Marlin,
        }
    }
}

impl GCodeDocument {
    pub fn parse(input: &[u8]) -> Result<Self, ParseError> {
        parse_document(input)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        serialize_document(self)
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }
}

pub fn serialize_document(doc: &GCodeDocument) -> Vec<u8> {
    let mut out = Vec::with_capacity(doc.lines.iter().map(|l| l.raw.len() + 2).sum());
    for line in &doc.lines {
        line.write_to(&mut out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rewriting_one_word_changes_only_that_line() {
        let src = b"G90\nG1 X10 Y0 E0.5 ; perimeter\nG1 X20 E1.0\n";
        let mut doc = parse_document(src).unwrap();
        doc.lines[1].set_value('E', 0.15);
        let out = String::from_utf8(doc.to_bytes()).unwrap();
        assert_eq!(out, "G90\nG1 X10 Y0 E0.15 ; perimeter\nG1 X20 E1.0\n");
    }

    #[test]
    fn setting_identical_text_keeps_line_clean() {
        let mut doc = parse_document(b"G1 X1 E0.5\n").unwrap();
        doc.lines[0].set_value('E', 0.5);
        assert!(!doc.lines[0].is_modified());
    }

    #[test]
    fn command_word_is_not_a_parameter() {
        let doc = parse_document(b"N10 G1 X5 *71\n").unwrap();
        let line = &doc.lines[0];
        assert!(line.is_command('G', 1));
        assert_eq!(line.value('X'), Some(5.0));
        assert_eq!(line.value('G'), None);
        assert_eq!(line.checksum, Some(71));
    }

    #[test]
    fn empty_document_serializes_to_nothing() {
        assert!(GCodeDocument::default().to_bytes().is_empty());
    }
}
