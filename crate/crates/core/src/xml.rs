//! Small helpers shared by the manifest, catalogue and application formats.

use std::borrow::Cow;
use std::fmt::Write as _;

use roxmltree::{Node, NodeType};

pub(crate) const PROLOG: &str = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";

/// Canonical writer: one element per line, two-space indentation, attributes
/// in the order given by the caller.
pub(crate) struct XmlWriter {
    out: String,
}

impl XmlWriter {
    pub(crate) fn new() -> Self {
        XmlWriter { out: PROLOG.to_owned() }
    }

    fn start(&mut self, depth: usize, name: &str, attrs: &[(&str, &str)]) {
        for _ in 0..depth {
            self.out.push_str("  ");
        }
        self.out.push('<');
        self.out.push_str(name);
        for (key, value) in attrs {
            let _ = write!(self.out, " {key}=\"{}\"", escape_attr(value));
        }
    }

    pub(crate) fn empty(&mut self, depth: usize, name: &str, attrs: &[(&str, &str)]) {
        self.start(depth, name, attrs);
        self.out.push_str("/>\n");
    }

    pub(crate) fn open(&mut self, depth: usize, name: &str, attrs: &[(&str, &str)]) {
        self.start(depth, name, attrs);
        self.out.push_str(">\n");
    }

    pub(crate) fn close(&mut self, depth: usize, name: &str) {
        for _ in 0..depth {
            self.out.push_str("  ");
        }
        let _ = writeln!(self.out, "</{name}>");
    }

    pub(crate) fn finish(self) -> String {
        self.out
    }
}

pub(crate) fn escape_attr(value: &str) -> Cow<'_, str> {
    if !value.contains(['&', '<', '>', '"', '\n', '\r', '\t']) {
        return Cow::Borrowed(value);
    }
    let mut out = String::with_capacity(value.len() + 8);
    for c in value.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            '\t' => out.push_str("&#9;"),
            c => out.push(c),
        }
    }
    Cow::Owned(out)
}

/// A schema problem found while reading an otherwise well-formed document.
#[derive(Debug)]
pub(crate) struct SchemaIssue(pub(crate) String);

impl SchemaIssue {
    pub(crate) fn new(msg: impl Into<String>) -> Self {
        SchemaIssue(msg.into())
    }
}

pub(crate) fn parse_document(text: &str) -> Result<roxmltree::Document<'_>, String> {
    roxmltree::Document::parse(text).map_err(|e| e.to_string())
}

pub(crate) fn expect_element(node: Node<'_, '_>, name: &str) -> Result<(), SchemaIssue> {
    if node.tag_name().namespace().is_some() || node.tag_name().name() != name {
        return Err(SchemaIssue::new(format!(
            "expected <{name}>, found <{}>",
            node.tag_name().name()
        )));
    }
    Ok(())
}

/// Rejects attributes outside `allowed`.
pub(crate) fn check_attrs(node: Node<'_, '_>, allowed: &[&str]) -> Result<(), SchemaIssue> {
    for attr in node.attributes() {
        if attr.namespace().is_some() || !allowed.contains(&attr.name()) {
            return Err(SchemaIssue::new(format!(
                "unexpected attribute `{}` on <{}>",
                attr.name(),
                node.tag_name().name()
            )));
        }
    }
    Ok(())
}

pub(crate) fn required_attr<'a>(node: Node<'a, '_>, name: &str) -> Result<&'a str, SchemaIssue> {
    node.attribute(name).ok_or_else(|| {
        SchemaIssue::new(format!("<{}> is missing attribute `{name}`", node.tag_name().name()))
    })
}

pub(crate) fn parse_ordinal(node: Node<'_, '_>, name: &str) -> Result<usize, SchemaIssue> {
    let raw = required_attr(node, name)?;
    if raw.is_empty() || !raw.bytes().all(|b| b.is_ascii_digit()) {
        return Err(SchemaIssue::new(format!("`{name}` must be a natural number, got `{raw}`")));
    }
    raw.parse().map_err(|_| SchemaIssue::new(format!("`{name}` out of range: `{raw}`")))
}

/// Element children of `node`. Comments are skipped; non-whitespace text is
/// a schema violation.
pub(crate) fn element_children<'a, 'i>(node: Node<'a, 'i>) -> Result<Vec<Node<'a, 'i>>, SchemaIssue> {
    let mut out = Vec::new();
    for child in node.children() {
        match child.node_type() {
            NodeType::Element => out.push(child),
            NodeType::Text
                if !child.text().unwrap_or("").trim().is_empty() => {
                    return Err(SchemaIssue::new(format!(
                        "unexpected text inside <{}>",
                        node.tag_name().name()
                    )));
                }
            _ => {}
        }
    }
    Ok(out)
}
