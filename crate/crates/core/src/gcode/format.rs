//! Canonical numeric formatting for rewritten words.

/// Formats `value` with at most `decimals` places, trailing zeros trimmed.
/// A decimal point is always preceded by a digit and negative zero prints as `0`.
pub fn format_fixed(value: f64, decimals: usize) -> String {
    let mut s = format!("{value:.decimals$}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".to_string();
    }
    s
}

/// Extruder axis: 5 decimals.
pub fn format_e(value: f64) -> String {
    format_fixed(value, 5)
}

/// X/Y/Z axes: 3 decimals.
pub fn format_axis(value: f64) -> String {
    format_fixed(value, 3)
}

pub fn format_feedrate(value: f64) -> String {
    format_fixed(value, 3)
}

/// Canonical text for a word with the given letter.
pub fn format_number(letter: char, value: f64) -> String {
    match letter {
        'E' => format_e(value),
        'X' | 'Y' | 'Z' | 'I' | 'J' | 'R' => format_axis(value),
        'F' => format_feedrate(value),
        _ => format_fixed(value, 5),
    }
}
