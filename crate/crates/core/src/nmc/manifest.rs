//! Manifest reader and canonical writer.

use std::collections::BTreeSet;

use roxmltree::Node;

use super::{is_materialized_key, Direction, Nmc, NmcError, PortDecl, Revision, Signature};
use crate::aslt::{Aslt, NodeId, NodeKind, TypingContext};
use crate::xml::{self, SchemaIssue, XmlWriter};

impl From<SchemaIssue> for NmcError {
    fn from(issue: SchemaIssue) -> Self {
        NmcError::SchemaViolation(issue.0)
    }
}

pub fn parse_manifest(text: &str) -> Result<Nmc, NmcError> {
    let doc = xml::parse_document(text).map_err(NmcError::MalformedDocument)?;
    let root = doc.root_element();
    xml::expect_element(root, "nmc")?;
    xml::check_attrs(root, &["id", "domain"])?;
    let id = xml::required_attr(root, "id")?;
    let domain = xml::required_attr(root, "domain")?;

    let mut tree = None;
    let mut typing = None;
    let mut ports = None;
    let mut revisions = None;
    for section in xml::element_children(root)? {
        let name = section.tag_name().name();
        let duplicate = match name {
            "aslt" => tree.replace(parse_aslt(section)?).is_some(),
            "inheritance" => typing.replace(parse_inheritance(section)?).is_some(),
            "linkage-control" => ports.replace(parse_linkage_control(section)?).is_some(),
            "revisions" => revisions.replace(parse_revisions(section)?).is_some(),
            other => return Err(NmcError::SchemaViolation(format!("unknown element <{other}> in <nmc>"))),
        };
        if duplicate {
            return Err(NmcError::SchemaViolation(format!("<{name}> appears more than once")));
        }
    }
    let tree = tree.ok_or_else(|| NmcError::SchemaViolation("missing <aslt>".into()))?;
    let revisions = revisions.ok_or_else(|| NmcError::SchemaViolation("missing <revisions>".into()))?;
    Nmc::assemble(id, domain, tree, typing.unwrap_or_default(), ports.unwrap_or_default(), revisions)
}

fn parse_aslt(section: Node<'_, '_>) -> Result<Aslt, NmcError> {
    xml::check_attrs(section, &[])?;
    let children = xml::element_children(section)?;
    let mut tree = Aslt::new();
    match children.as_slice() {
        [] => return Err(NmcError::SchemaViolation("<aslt> has no root node".into())),
        [root] => parse_node(root.to_owned(), None, &mut tree, true)?,
        _ => return Err(NmcError::SchemaViolation("<aslt> must contain exactly one root node".into())),
    }
    Ok(tree)
}

fn parse_node(el: Node<'_, '_>, parent: Option<&str>, tree: &mut Aslt, is_root: bool) -> Result<(), NmcError> {
    xml::expect_element(el, "node")?;
    xml::check_attrs(el, &["id", "kind", "name", "type"])?;
    let id = xml::required_attr(el, "id")?;
    let raw_kind = xml::required_attr(el, "kind")?;
    let kind = NodeKind::parse(raw_kind)
        .ok_or_else(|| NmcError::SchemaViolation(format!("unknown node kind `{raw_kind}`")))?;
    let name = xml::required_attr(el, "name")?;
    tree.add_node_with_id(id, parent, kind, name, el.attribute("type"))?;

    for child in xml::element_children(el)? {
        match child.tag_name().name() {
            "node" => parse_node(child, Some(id), tree, false)?,
            "meta" => {
                xml::check_attrs(child, &["key", "value"])?;
                let key = xml::required_attr(child, "key")?;
                let value = xml::required_attr(child, "value")?;
                if is_root && is_materialized_key(key) {
                    return Err(NmcError::SchemaViolation(format!(
                        "meta key `{key}` on the root node is reserved for the loader"
                    )));
                }
                tree.attach_meta(id, key, value)?;
            }
            other => return Err(NmcError::SchemaViolation(format!("unknown element <{other}> in <node>"))),
        }
    }
    Ok(())
}

fn parse_inheritance(section: Node<'_, '_>) -> Result<TypingContext, NmcError> {
    xml::check_attrs(section, &[])?;
    let mut typing = TypingContext::new();
    for edge in xml::element_children(section)? {
        xml::expect_element(edge, "edge")?;
        xml::check_attrs(edge, &["sub", "super"])?;
        typing.declare_inheritance(xml::required_attr(edge, "sub")?, xml::required_attr(edge, "super")?)?;
    }
    Ok(typing)
}

fn parse_linkage_control(section: Node<'_, '_>) -> Result<Vec<PortDecl>, NmcError> {
    xml::check_attrs(section, &[])?;
    let mut ports = Vec::new();
    for el in xml::element_children(section)? {
        xml::check_attrs(el, &["interface", "node"])?;
        let interface = xml::required_attr(el, "interface")?.to_owned();
        let signatures = xml::element_children(el)?
            .into_iter()
            .map(parse_signature)
            .collect::<Result<Vec<_>, _>>()?;
        match el.tag_name().name() {
            "provided" => ports.push(PortDecl::Provided {
                interface,
                node: NodeId::new(xml::required_attr(el, "node")?),
                declared: (!signatures.is_empty()).then_some(signatures),
            }),
            "required" => ports.push(PortDecl::Required {
                interface,
                node: el.attribute("node").map(NodeId::new),
                signatures,
            }),
            other => {
                return Err(NmcError::SchemaViolation(format!("unknown element <{other}> in <linkage-control>")))
            }
        }
    }
    Ok(ports)
}

fn parse_signature(el: Node<'_, '_>) -> Result<Signature, NmcError> {
    xml::expect_element(el, "signature")?;
    xml::check_attrs(el, &["name", "returns"])?;
    let mut params = Vec::new();
    for p in xml::element_children(el)? {
        xml::expect_element(p, "param")?;
        xml::check_attrs(p, &["type"])?;
        params.push(xml::required_attr(p, "type")?.to_owned());
    }
    Ok(Signature {
        name: xml::required_attr(el, "name")?.to_owned(),
        params,
        return_type: xml::required_attr(el, "returns")?.to_owned(),
    })
}

fn parse_revisions(section: Node<'_, '_>) -> Result<Vec<Revision>, NmcError> {
    xml::check_attrs(section, &[])?;
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for el in xml::element_children(section)? {
        xml::expect_element(el, "revision")?;
        xml::check_attrs(el, &["ordinal", "label"])?;
        let ordinal = xml::parse_ordinal(el, "ordinal")?;
        if !seen.insert(ordinal) {
            return Err(NmcError::SchemaViolation(format!("revision ordinal {ordinal} appears twice")));
        }
        let mut hidden = BTreeSet::new();
        for m in xml::element_children(el)? {
            xml::expect_element(m, "masked")?;
            xml::check_attrs(m, &["node"])?;
            hidden.insert(NodeId::new(xml::required_attr(m, "node")?));
        }
        out.push(Revision { ordinal, label: xml::required_attr(el, "label")?.to_owned(), hidden_roots: hidden });
    }
    Ok(out)
}

/// Canonical text: fixed element order, attributes sorted by name,
/// two-space indentation, newest revision first.
pub fn serialize_manifest(nmc: &Nmc) -> String {
    let mut w = XmlWriter::new();
    w.open(0, "nmc", &[("domain", nmc.domain()), ("id", nmc.id())]);

    w.open(1, "aslt", &[]);
    if let Some(root) = nmc.tree().root() {
        write_node(&mut w, 2, root, true);
    }
    w.close(1, "aslt");

    let edges: Vec<(&str, &str)> = nmc.typing().edges().collect();
    if edges.is_empty() {
        w.empty(1, "inheritance", &[]);
    } else {
        w.open(1, "inheritance", &[]);
        for (sub, sup) in edges {
            w.empty(2, "edge", &[("sub", sub), ("super", sup)]);
        }
        w.close(1, "inheritance");
    }

    if nmc.ports().is_empty() {
        w.empty(1, "linkage-control", &[]);
    } else {
        w.open(1, "linkage-control", &[]);
        for port in nmc.ports() {
            match port.direction {
                Direction::Provided => {
                    let node = port.source_node.as_ref().map(NodeId::as_str).unwrap_or_default();
                    w.empty(2, "provided", &[("interface", &port.interface_name), ("node", node)]);
                }
                Direction::Required => {
                    let mut attrs = vec![("interface", port.interface_name.as_str())];
                    if let Some(node) = &port.source_node {
                        attrs.push(("node", node.as_str()));
                    }
                    if port.signatures.is_empty() {
                        w.empty(2, "required", &attrs);
                        continue;
                    }
                    w.open(2, "required", &attrs);
                    for sig in &port.signatures {
                        let attrs = [("name", sig.name.as_str()), ("returns", sig.return_type.as_str())];
                        if sig.params.is_empty() {
                            w.empty(3, "signature", &attrs);
                        } else {
                            w.open(3, "signature", &attrs);
                            for p in &sig.params {
                                w.empty(4, "param", &[("type", p)]);
                            }
                            w.close(3, "signature");
                        }
                    }
                    w.close(2, "required");
                }
            }
        }
        w.close(1, "linkage-control");
    }

    w.open(1, "revisions", &[]);
    for rev in nmc.revisions().iter().rev() {
        let ordinal = rev.ordinal.to_string();
        let attrs = [("label", rev.label.as_str()), ("ordinal", ordinal.as_str())];
        if rev.hidden_roots.is_empty() {
            w.empty(2, "revision", &attrs);
        } else {
            w.open(2, "revision", &attrs);
            for node in &rev.hidden_roots {
                w.empty(3, "masked", &[("node", node.as_str())]);
            }
            w.close(2, "revision");
        }
    }
    w.close(1, "revisions");

    w.close(0, "nmc");
    w.finish()
}

fn write_node(w: &mut XmlWriter, depth: usize, node: crate::aslt::NodeRef<'_>, is_root: bool) {
    let mut attrs = vec![("id", node.id().as_str()), ("kind", node.kind().as_str()), ("name", node.name())];
    if let Some(ty) = node.type_name() {
        attrs.push(("type", ty));
    }
    let meta: Vec<_> = node.meta().iter().filter(|m| !(is_root && is_materialized_key(&m.key))).collect();
    let mut children = node.children().peekable();
    if meta.is_empty() && children.peek().is_none() {
        w.empty(depth, "node", &attrs);
        return;
    }
    w.open(depth, "node", &attrs);
    for child in children {
        write_node(w, depth + 1, child, false);
    }
    for m in meta {
        w.empty(depth + 1, "meta", &[("key", &m.key), ("value", &m.value)]);
    }
    w.close(depth, "node");
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"<nmc id="motor" domain="control-systems">
  <aslt>
    <node id="n1" kind="interface" name="IMotor">
      <node id="n2" kind="method" name="setSpeed" type="void">
        <node id="n3" kind="parameter" name="rpm" type="int"/>
      </node>
    </node>
  </aslt>
  <linkage-control>
    <provided interface="IMotor" node="n1"/>
  </linkage-control>
  <revisions><revision ordinal="0" label="1.0"/></revisions>
</nmc>"#;

    const SPEC_SKETCH: &str = r#"<nmc id="motor-driver" domain="control-systems">
  <aslt>
    <node id="n1" kind="package" name="driver">
      <node id="n2" kind="interface" name="IMotor">
        <node id="n3" kind="method" name="setSpeed" type="void">
          <node id="n4" kind="parameter" name="rpm" type="int"/>
        </node>
        <node id="n5" kind="method" name="setRamp" type="void">
          <node id="n6" kind="parameter" name="slope" type="float"/>
        </node>
      </node>
      <meta key="pattern.group" value="factory"/>
    </node>
  </aslt>
  <inheritance><edge sub="int" super="number"/></inheritance>
  <linkage-control>
    <provided interface="IMotor" node="n2"/>
    <required interface="ISensor">
      <signature name="read" returns="float"/>
    </required>
  </linkage-control>
  <revisions>
    <revision ordinal="1" label="1.1"/>            <!-- newest, empty mask -->
    <revision ordinal="0" label="1.0"><masked node="n5"/></revision>
  </revisions>
</nmc>"#;

    #[test]
    fn minimal_manifest() {
        let n = parse_manifest(MINIMAL).unwrap();
        assert_eq!(n.ports().len(), 1);
        assert_eq!(n.revisions().len(), 1);
        assert_eq!(n.ports()[0].signatures, [Signature::new("setSpeed", ["int"], "void")]);
    }

    #[test]
    fn sketch_document_parses() {
        let n = parse_manifest(SPEC_SKETCH).unwrap();
        assert_eq!(n.id(), "motor-driver");
        assert!(n.typing().is_subtype("int", "number"));
        assert_eq!(n.tree().meta_lookup("n1", "pattern").unwrap()[0].value, "factory");
        assert_eq!(n.tree().meta_lookup("n1", "linkage").unwrap().len(), 2);
        let old = n.at_revision(0).unwrap();
        assert_eq!(old.provided_port("IMotor").unwrap().signatures.len(), 1);
    }

    #[test]
    fn round_trip_is_structural_and_byte_stable() {
        let n = parse_manifest(SPEC_SKETCH).unwrap();
        let text = serialize_manifest(&n);
        assert_eq!(serialize_manifest(&n), text);
        let again = parse_manifest(&text).unwrap();
        assert_eq!(again, n);
        assert_eq!(serialize_manifest(&again), text);
    }

    #[test]
    fn meta_order_preserved_in_output() {
        let doc = MINIMAL.replace(
            "<node id=\"n3\" kind=\"parameter\" name=\"rpm\" type=\"int\"/>",
            "<node id=\"n3\" kind=\"parameter\" name=\"rpm\" type=\"int\"><meta key=\"z\" value=\"1\"/><meta key=\"a\" value=\"2\"/></node>",
        );
        let text = serialize_manifest(&parse_manifest(&doc).unwrap());
        let z = text.find("key=\"z\"").unwrap();
        let a = text.find("key=\"a\"").unwrap();
        assert!(z < a);
    }

    #[test]
    fn non_consecutive_ordinals() {
        let doc = SPEC_SKETCH.replace("ordinal=\"1\"", "ordinal=\"2\"");
        assert!(matches!(parse_manifest(&doc), Err(NmcError::SchemaViolation(_))));
    }

    #[test]
    fn malformed_and_unknown_elements() {
        assert!(matches!(parse_manifest("<nmc id="), Err(NmcError::MalformedDocument(_))));
        let doc = MINIMAL.replace("<linkage-control>", "<extra/><linkage-control>");
        assert!(matches!(parse_manifest(&doc), Err(NmcError::SchemaViolation(_))));
        let doc = MINIMAL.replace("kind=\"interface\"", "kind=\"enum\"");
        assert!(matches!(parse_manifest(&doc), Err(NmcError::SchemaViolation(_))));
    }

    #[test]
    fn bad_nesting_and_dangling_reference() {
        let doc = MINIMAL.replace("kind=\"parameter\"", "kind=\"package\"").replace(" type=\"int\"", "");
        assert!(matches!(parse_manifest(&doc), Err(NmcError::SchemaViolation(_))));
        let doc = MINIMAL.replace("node=\"n1\"", "node=\"n9\"");
        assert!(matches!(parse_manifest(&doc), Err(NmcError::SchemaViolation(_))));
    }

    #[test]
    fn inheritance_cycle_is_schema_violation() {
        let doc = SPEC_SKETCH.replace(
            "<edge sub=\"int\" super=\"number\"/>",
            "<edge sub=\"int\" super=\"number\"/><edge sub=\"number\" super=\"int\"/>",
        );
        assert!(matches!(parse_manifest(&doc), Err(NmcError::SchemaViolation(_))));
    }

    #[test]
    fn drifting_provided_signatures() {
        let doc = MINIMAL.replace(
            "<provided interface=\"IMotor\" node=\"n1\"/>",
            "<provided interface=\"IMotor\" node=\"n1\"><signature name=\"setSpeed\" returns=\"void\"><param type=\"float\"/></signature></provided>",
        );
        assert!(matches!(parse_manifest(&doc), Err(NmcError::SignatureDrift { .. })));
        let ok = doc.replace("type=\"float\"/></signature>", "type=\"int\"/></signature>");
        parse_manifest(&ok).unwrap();
    }

    #[test]
    fn reserved_root_meta_rejected() {
        let doc = SPEC_SKETCH.replace("key=\"pattern.group\"", "key=\"linkage.provides\"");
        assert!(matches!(parse_manifest(&doc), Err(NmcError::SchemaViolation(_))));
    }
}
