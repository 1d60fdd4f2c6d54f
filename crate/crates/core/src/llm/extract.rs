/// The contents of the last fenced code block, or the whole response when
/// there is none. An unterminated final fence runs to the end of the text.
pub fn extract_code(response: &str) -> String {
    let mut last: Option<String> = None;
    let mut current: Option<String> = None;
    for line in response.split_inclusive('\n') {
        let is_fence = line.trim_start().starts_with("```");
        match (&mut current, is_fence) {
            (None, true) => current = Some(String::new()),
            (Some(_), true) => last = current.take(),
            (Some(body), false) => body.push_str(line),
            (None, false) => {}
        }
    }
    if let Some(open) = current {
        if !open.is_empty() {
            last = Some(open);
        }
    }
    last.unwrap_or_else(|| response.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_block() {
        let r = "Here you go:\n```python\ndef f():\n    return 1\n```\nDone.";
        assert_eq!(extract_code(r), "def f():\n    return 1\n");
    }

    #[test]
    fn last_block_wins() {
        let r = "First a sketch:\n```\nsketch()\n```\nFinal:\n```python\nfinal()\n```\n";
        assert_eq!(extract_code(r), "final()\n");
    }

    #[test]
    fn no_block_returns_everything() {
        assert_eq!(extract_code("def f(): pass"), "def f(): pass");
    }

    #[test]
    fn unterminated_fence() {
        assert_eq!(extract_code("```python\nx = 1\n"), "x = 1\n");
    }
}
