use thiserror::Error;

use super::{Dialect, GCodeDocument, GCodeLine, LineKind, Terminator, Word};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("line {line}, column {column}: malformed word `{token}`: {reason}")]
    MalformedWord {
        line: usize,
        column: usize,
        token: String,
        reason: &'static str,
    },
    #[error("line {line}: not valid UTF-8")]
    InvalidUtf8 { line: usize },
}

impl ParseError {
    /// 1-based line number of the failure.
    pub fn line(&self) -> usize {
        match self {
            ParseError::MalformedWord { line, .. } | ParseError::InvalidUtf8 { line } => *line,
        }
    }
}

/// Commands whose remaining text is a free-form string argument.
const STRING_ARG_COMMANDS: &[u32] = &[23, 28, 30, 32, 117, 118, 928];

/// Splits the input on LF (optionally preceded by CR) and parses each line.
pub fn parse_document(input: &[u8]) -> Result<GCodeDocument, ParseError> {
    let mut lines = Vec::new();
    let mut rest = input;
    let mut line_no = 0;
    while !rest.is_empty() {
        line_no += 1;
        let (body, terminator, next) = match rest.iter().position(|&b| b == b'\n') {
            Some(i) if i > 0 && rest[i - 1] == b'\r' => {
                (&rest[..i - 1], Terminator::CrLf, &rest[i + 1..])
            }
            Some(i) => (&rest[..i], Terminator::Lf, &rest[i + 1..]),
            None => (rest, Terminator::None, &rest[rest.len()..]),
        };
        let text =
            std::str::from_utf8(body).map_err(|_| ParseError::InvalidUtf8 { line: line_no })?;
        let mut line = parse_line(text, line_no)?;
        line.terminator = terminator;
        lines.push(line);
        rest = next;
    }
    Ok(GCodeDocument {
        lines,
        dialect: Dialect::Marlin,
    })
}

/// Parses one line of text (terminator excluded). `line_no` is only used for errors.
pub fn parse_line(text: &str, line_no: usize) -> Result<GCodeLine, ParseError> {
    let (code, comment) = match text.find(';') {
        Some(i) => (&text[..i], Some(text[i + 1..].to_string())),
        None => (text, None),
    };
    let bytes = code.as_bytes();
    let mut words: Vec<Word> = Vec::new();
    let mut text_arg = None;
    let mut checksum = None;
    let mut first_flag = None;
    let mut i = 0;

    let fail = |at: usize, reason: &'static str| {
        let start = code[..at]
            .rfind(|c: char| c.is_whitespace())
            .map_or(0, |p| p + 1);
        let end = code[at..]
            .find(|c: char| c.is_whitespace())
            .map_or(code.len(), |p| at + p);
        ParseError::MalformedWord {
            line: line_no,
            column: code[..at].chars().count() + 1,
            token: code[start..end].to_string(),
            reason,
        }
    };

    while i < bytes.len() {
        let b = bytes[i];
        if b.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if b == b'*' {
            let start = i + 1;
            let mut j = start;
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            if j == start {
                return Err(fail(i, "checksum without digits"));
            }
            checksum = code[start..j].parse().ok();
            if code[j..].trim().is_empty() {
                break;
            }
            return Err(fail(j, "text after checksum"));
        }
        if !b.is_ascii_alphabetic() {
            return Err(fail(i, "expected a word letter"));
        }
        let letter = b.to_ascii_uppercase() as char;
        let num_start = i + 1;
        let num_end = scan_number(bytes, num_start);
        if num_end == num_start {
            // Axis flags such as `G28 X` or `M84 E` carry no number.
            let flag_ok = bytes.get(num_end).is_none_or(|n| n.is_ascii_whitespace() || *n == b'*');
            if words.iter().all(|w| w.letter == 'N') || !flag_ok {
                return Err(fail(i, "letter without a numeric value"));
            }
            words.push(Word::new(letter, 0.0, String::new()));
            first_flag.get_or_insert(i);
            i = num_end;
            continue;
        }
        if let Some(&next) = bytes.get(num_end) {
            if !(next.is_ascii_whitespace() || next.is_ascii_alphabetic() || next == b'*') {
                return Err(fail(num_end, "invalid numeric"));
            }
        }
        let num_text = &code[num_start..num_end];
        let value: f64 = num_text.parse().map_err(|_| fail(i, "invalid numeric"))?;
        words.push(Word::new(letter, value, num_text.to_string()));
        i = num_end;

        let is_command = words.iter().filter(|w| w.letter != 'N').count() == 1;
        if is_command && letter == 'M' && STRING_ARG_COMMANDS.iter().any(|&m| value == m as f64) {
            let arg = code[i..].trim_start();
            let arg = arg.trim_end_matches(['\r']);
            if !arg.trim().is_empty() {
                text_arg = Some(arg.to_string());
            }
            break;
        }
    }

    let kind = classify(&words);
    if let Some(at) = first_flag {
        if matches!(kind, LineKind::Motion | LineKind::SetPosition | LineKind::Mode) {
            return Err(fail(at, "letter without a numeric value"));
        }
    }
    Ok(GCodeLine {
        raw: text.to_string(),
        terminator: Terminator::None,
        words,
        comment,
        text_arg,
        checksum,
        kind,
        dirty: false,
    })
}

/// `[+-]?(digits[.digits*] | .digits)`; returns the end index (== start when absent).
fn scan_number(bytes: &[u8], start: usize) -> usize {
    let mut i = start;
    if matches!(bytes.get(i), Some(b'+' | b'-')) {
        i += 1;
    }
    let int_start = i;
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
    }
    let mut digits = i - int_start;
    if bytes.get(i) == Some(&b'.') {
        let frac_start = i + 1;
        let mut j = frac_start;
        while j < bytes.len() && bytes[j].is_ascii_digit() {
            j += 1;
        }
        digits += j - frac_start;
        if digits > 0 {
            i = j;
        }
    }
    if digits == 0 {
        start
    } else {
        i
    }
}

pub(crate) fn classify(words: &[Word]) -> LineKind {
    let Some(cmd) = words.iter().find(|w| w.letter != 'N') else {
        return LineKind::CommentOnly;
    };
    let code = cmd.value;
    match cmd.letter {
        'G' if [0.0, 1.0, 2.0, 3.0].contains(&code) => LineKind::Motion,
        'G' if code == 90.0 || code == 91.0 => LineKind::Mode,
        'G' if code == 92.0 => LineKind::SetPosition,
        'M' if code == 82.0 || code == 83.0 => LineKind::Mode,
        'T' => LineKind::ToolChange,
        _ => LineKind::Other,
    }
}
