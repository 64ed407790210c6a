//! Recovers C source from a model reply. Models are told to answer with
//! bare code but often wrap it in fences or surround it with prose.

/// Returns the code in `reply`, or `None` if nothing code-like remains.
pub fn extract_code_text(reply: &str) -> Option<String> {
    let blocks = fenced_blocks(reply);
    let text = if blocks.is_empty() {
        strip_prose(reply)
    } else {
        let best = blocks
            .iter()
            .filter(|b| looks_like_c(b))
            .max_by_key(|b| b.len())
            .or_else(|| blocks.iter().max_by_key(|b| b.len()))?;
        best.clone()
    };
    if text.trim().is_empty() {
        None
    } else {
        Some(text)
    }
}

fn fenced_blocks(reply: &str) -> Vec<String> {
    let mut blocks = Vec::new();
    let mut current: Option<String> = None;
    for line in reply.split_inclusive('\n') {
        let is_fence = line.trim_start().starts_with("```");
        match (&mut current, is_fence) {
            (None, true) => current = Some(String::new()),
            (Some(body), true) => {
                blocks.push(std::mem::take(body));
                current = None;
            }
            (Some(body), false) => body.push_str(line),
            (None, false) => {}
        }
    }
    // an unterminated fence (e.g. a reply cut at the token limit)
    if let Some(body) = current {
        if !body.trim().is_empty() {
            blocks.push(body);
        }
    }
    blocks
}

fn looks_like_c(text: &str) -> bool {
    text.contains(';') || text.contains('{') || text.contains("#include")
}

fn is_code_line(line: &str) -> bool {
    let t = line.trim();
    if t.is_empty() {
        return false;
    }
    if t.starts_with('#') || t.starts_with("//") || t.starts_with("/*") || t.starts_with('*') {
        return true;
    }
    if t.contains(';') || t.contains('{') || t.contains('}') {
        return true;
    }
    // a bare function header such as `int main(void)`
    !is_prose(t) && t.ends_with(')') && t.contains('(')
}

/// Sentence-like: starts with a capitalized word followed by another word,
/// or ends with a colon.
fn is_prose(t: &str) -> bool {
    if t.ends_with(':') && !t.contains(';') {
        return true;
    }
    let mut words = t.split_whitespace();
    let (Some(first), Some(second)) = (words.next(), words.next()) else {
        return false;
    };
    first.chars().next().is_some_and(|c| c.is_ascii_uppercase())
        && first.chars().skip(1).all(|c| c.is_ascii_lowercase() || c == '\'' || c == ',')
        && second.chars().next().is_some_and(|c| c.is_alphabetic())
}

fn strip_prose(reply: &str) -> String {
    let lines: Vec<&str> = reply.split_inclusive('\n').collect();
    let first = lines.iter().position(|l| is_code_line(l) && !is_prose(l.trim()));
    let last = lines.iter().rposition(|l| is_code_line(l) && !is_prose(l.trim()));
    match (first, last) {
        (Some(a), Some(b)) if a <= b => lines[a..=b].concat(),
        _ => String::new(),
    }
}
