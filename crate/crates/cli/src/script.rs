//! Script files: chain blocks separated by blank lines, `#` comments.

use tabchain_core::command::{parse_chain, CommandChain, ParseError};

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    /// 1-based line of the block's first line in the file.
    pub first_line: usize,
    pub text: String,
}

pub fn blocks(source: &str) -> Vec<Block> {
    let mut out = Vec::new();
    let mut current: Option<Block> = None;
    for (i, raw) in source.lines().enumerate() {
        let is_comment = raw.trim_start().starts_with('#');
        if raw.trim().is_empty() {
            out.extend(current.take());
            continue;
        }
        let block = current.get_or_insert_with(|| Block {
            first_line: i + 1,
            text: String::new(),
        });
        // comment lines stay as empty lines so positions keep matching the file
        if !is_comment {
            block.text.push_str(raw);
        }
        block.text.push('\n');
    }
    out.extend(current);
    out.retain(|b| !b.text.trim().is_empty());
    // an error at end of input should point at the last line, not past it
    for b in &mut out {
        b.text.truncate(b.text.trim_end().len());
    }
    out
}

/// Parses a block, reporting errors at file positions.
pub fn parse_block(b: &Block) -> Result<CommandChain, ParseError> {
    parse_chain(&b.text).map_err(|mut e| {
        e.line += b.first_line - 1;
        e
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_on_blank_lines() {
        let src = "# movie report\nDERIVE m = box_office - cost;\nSORT m DESC\n\n\n# then\nSLICE TOP 5\n";
        let b = blocks(src);
        assert_eq!(b.len(), 2);
        assert_eq!(b[0].first_line, 1);
        assert_eq!(b[1].first_line, 6);
        assert_eq!(parse_block(&b[0]).unwrap().len(), 2);
        assert_eq!(parse_block(&b[1]).unwrap().len(), 1);
    }

    #[test]
    fn comment_only_blocks_vanish() {
        assert!(blocks("# a\n# b\n\n   \n").is_empty());
    }

    #[test]
    fn errors_use_file_lines() {
        let b = blocks("SLICE TOP 1\n\n# x\nSORT\n");
        let e = parse_block(&b[1]).unwrap_err();
        assert_eq!(e.line, 4);
    }
}
