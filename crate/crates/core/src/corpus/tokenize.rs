/// Splits text into maximal alphanumeric runs and single punctuation marks.
///
/// Tokens come back lowercased; `caps[i]` records whether token `i` began
/// with an uppercase letter in the original text. Whitespace separates
/// tokens and is never part of one.
pub fn tokenize(text: &str) -> (Vec<String>, Vec<bool>) {
    let mut tokens = Vec::new();
    let mut caps = Vec::new();
    let mut current = String::new();
    let mut current_cap = false;
    let flush = |cur: &mut String, cap: bool, tokens: &mut Vec<String>, caps: &mut Vec<bool>| {
        if !cur.is_empty() {
            tokens.push(std::mem::take(cur));
            caps.push(cap);
        }
    };
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            if current.is_empty() {
                current_cap = ch.is_uppercase();
            }
            current.extend(ch.to_lowercase());
        } else {
            flush(&mut current, current_cap, &mut tokens, &mut caps);
            if !ch.is_whitespace() && !ch.is_control() {
                tokens.push(ch.to_lowercase().collect());
                caps.push(false);
            }
        }
    }
    flush(&mut current, current_cap, &mut tokens, &mut caps);
    (tokens, caps)
}

/// The text before the first blank line, with leading blank lines skipped.
pub fn first_paragraph(raw: &str) -> String {
    raw.lines()
        .skip_while(|l| l.trim().is_empty())
        .take_while(|l| !l.trim().is_empty())
        .collect::<Vec<_>>()
        .join("\n")
}
