//! Annotation sets and the XML format they are stored in.
//!
//! ```xml
//! <Annotations subject="S01">
//!   <Annotation label="plaque" id="7">
//!     <Vertices>
//!       <Vertex x="120.5" y="88"/>
//!       <Vertex x="131" y="90"/>
//!       <Vertex x="126" y="101.25"/>
//!     </Vertices>
//!   </Annotation>
//! </Annotations>
//! ```
//!
//! Coordinates are slide pixels with pixel centers on integer positions.
//! `label` and `id` are optional. Elements outside this schema are skipped
//! and reported as warnings.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    /// Vertices `[x, y]` in drawing order; the closing edge is implicit.
    pub polygon: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationSet {
    pub subject_id: String,
    pub annotations: Vec<Annotation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedAnnotations {
    pub set: AnnotationSet,
    pub warnings: Vec<String>,
}

/// Reader for one annotation file format. Other tools' exports plug in here
/// by converting to an [`AnnotationSet`].
pub trait AnnotationFormat {
    fn parse(&self, bytes: &[u8]) -> Result<ParsedAnnotations>;
}

/// The native XML schema documented at the top of this module.
#[derive(Debug, Clone, Copy, Default)]
pub struct NativeXml;

impl AnnotationFormat for NativeXml {
    fn parse(&self, bytes: &[u8]) -> Result<ParsedAnnotations> {
        parse_annotations_xml(bytes)
    }
}

fn attr_f64(node: roxmltree::Node, name: &str) -> Result<f64> {
    let raw = node.attribute(name).ok_or_else(|| {
        Error::MalformedXml(format!(
            "<Vertex> at byte {} lacks attribute {name}",
            node.range().start
        ))
    })?;
    let v: f64 = raw.trim().parse().map_err(|_| {
        Error::MalformedXml(format!("vertex {name}={raw:?} is not a number"))
    })?;
    if !v.is_finite() {
        return Err(Error::MalformedXml(format!("vertex {name}={raw:?} is not finite")));
    }
    Ok(v)
}

fn describe(node: roxmltree::Node) -> String {
    format!("<{}> at byte {}", node.tag_name().name(), node.range().start)
}

fn parse_vertices(list: roxmltree::Node, warnings: &mut Vec<String>) -> Result<Vec<[f64; 2]>> {
    let mut out = Vec::new();
    for v in list.children().filter(|n| n.is_element()) {
        if v.tag_name().name() == "Vertex" {
            out.push([attr_f64(v, "x")?, attr_f64(v, "y")?]);
        } else {
            warnings.push(format!("ignored unknown element {}", describe(v)));
        }
    }
    Ok(out)
}

/// Parses the native XML schema and runs [`clean_polygon`] on every shape.
pub fn parse_annotations_xml(bytes: &[u8]) -> Result<ParsedAnnotations> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| Error::MalformedXml(format!("not UTF-8: {e}")))?;
    let doc = roxmltree::Document::parse(text).map_err(|e| Error::MalformedXml(e.to_string()))?;
    let root = doc.root_element();
    if root.tag_name().name() != "Annotations" {
        return Err(Error::MalformedXml(format!(
            "root element is <{}>, expected <Annotations>",
            root.tag_name().name()
        )));
    }
    let subject_id = root
        .attribute("subject")
        .ok_or_else(|| Error::MalformedXml("<Annotations> lacks a subject attribute".into()))?
        .to_string();

    let mut warnings = Vec::new();
    let mut annotations = Vec::new();
    for node in root.children().filter(|n| n.is_element()) {
        if node.tag_name().name() != "Annotation" {
            warnings.push(format!("ignored unknown element {}", describe(node)));
            continue;
        }
        let label = node.attribute("label").unwrap_or("").to_string();
        let id = node.attribute("id").map(str::to_string);
        let mut polygon = Vec::new();
        let mut lists = 0;
        for child in node.children().filter(|n| n.is_element()) {
            if child.tag_name().name() == "Vertices" {
                lists += 1;
                polygon.extend(parse_vertices(child, &mut warnings)?);
            } else {
                warnings.push(format!("ignored unknown element {}", describe(child)));
            }
        }
        if lists > 1 {
            warnings.push(format!(
                "{} has {lists} <Vertices> lists; they were concatenated",
                describe(node)
            ));
        }
        let name = id.clone().unwrap_or_else(|| describe(node));
        match clean_polygon(polygon) {
            Ok(polygon) => annotations.push(Annotation { label, id, polygon }),
            Err(reason) => warnings.push(format!("dropped annotation {name}: {reason}")),
        }
    }
    if annotations.is_empty() {
        return Err(Error::EmptyAnnotationSet);
    }
    Ok(ParsedAnnotations {
        set: AnnotationSet {
            subject_id,
            annotations,
        },
        warnings,
    })
}

/// Removes repeated consecutive vertices (including a closing copy of the
/// first vertex) and rejects polygons that end up with fewer than three
/// vertices or whose edges cross.
pub fn clean_polygon(mut poly: Vec<[f64; 2]>) -> std::result::Result<Vec<[f64; 2]>, String> {
    poly.dedup();
    while poly.len() > 1 && poly.first() == poly.last() {
        poly.pop();
    }
    if poly.len() < 3 {
        return Err(format!("{} distinct vertices", poly.len()));
    }
    if is_self_intersecting(&poly) {
        return Err("self-intersecting outline".into());
    }
    Ok(poly)
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

/// Closed-segment intersection test, touching and collinear overlap included.
pub(crate) fn segments_intersect(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

/// True when two edges that are not neighbors along the outline meet.
pub fn is_self_intersecting(poly: &[[f64; 2]]) -> bool {
    let n = poly.len();
    if n < 4 {
        return false;
    }
    let edge = |i: usize| (poly[i], poly[(i + 1) % n]);
    for i in 0..n {
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let (a, b) = edge(i);
            let (c, d) = edge(j);
            if segments_intersect(a, b, c, d) {
                return true;
            }
        }
    }
    false
}

/// Signed shoelace area (positive for counter-clockwise in x-right, y-up axes).
pub fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    0.5 * (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
}

/// Serializes a set back to the native schema.
pub fn write_annotations_xml(set: &AnnotationSet) -> String {
    fn esc(s: &str) -> String {
        s.replace('&', "&amp;")
            .replace('"', "&quot;")
            .replace('<', "&lt;")
            .replace('>', "&gt;")
    }
    let mut out = format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<Annotations subject=\"{}\">\n",
        esc(&set.subject_id)
    );
    for a in &set.annotations {
        out.push_str(&format!("  <Annotation label=\"{}\"", esc(&a.label)));
        if let Some(id) = &a.id {
            out.push_str(&format!(" id=\"{}\"", esc(id)));
        }
        out.push_str(">\n    <Vertices>\n");
        for v in &a.polygon {
            out.push_str(&format!("      <Vertex x=\"{}\" y=\"{}\"/>\n", v[0], v[1]));
        }
        out.push_str("    </Vertices>\n  </Annotation>\n");
    }
    out.push_str("</Annotations>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const TRIANGLE: &str = r#"<Annotations subject="S1">
        <Annotation label="plaque" id="a">
          <Vertices><Vertex x="1" y="1"/><Vertex x="9" y="1"/><Vertex x="5" y="7.5"/></Vertices>
        </Annotation>
      </Annotations>"#;

    #[test]
    fn minimal_triangle() {
        let p = parse_annotations_xml(TRIANGLE.as_bytes()).unwrap();
        assert_eq!(p.set.subject_id, "S1");
        assert_eq!(p.set.annotations.len(), 1);
        assert_eq!(p.set.annotations[0].polygon, vec![[1.0, 1.0], [9.0, 1.0], [5.0, 7.5]]);
        assert!(p.warnings.is_empty());
    }

    #[test]
    fn empty_document() {
        let doc = r#"<Annotations subject="S1"></Annotations>"#;
        assert!(matches!(
            parse_annotations_xml(doc.as_bytes()),
            Err(Error::EmptyAnnotationSet)
        ));
    }

    #[test]
    fn malformed_inputs() {
        for doc in [
            "<Annotations subject=\"x\">",
            "<Regions subject=\"x\"/>",
            "<Annotations/>",
            r#"<Annotations subject="x"><Annotation><Vertices><Vertex x="a" y="1"/></Vertices></Annotation></Annotations>"#,
            r#"<Annotations subject="x"><Annotation><Vertices><Vertex y="1"/></Vertices></Annotation></Annotations>"#,
        ] {
            assert!(
                matches!(parse_annotations_xml(doc.as_bytes()), Err(Error::MalformedXml(_))),
                "{doc}"
            );
        }
    }

    #[test]
    fn unknown_elements_warn() {
        let doc = r#"<Annotations subject="S">
            <Meta/>
            <Annotation><Color/><Vertices><Vertex x="0" y="0"/><Point/><Vertex x="4" y="0"/><Vertex x="0" y="4"/></Vertices></Annotation>
          </Annotations>"#;
        let p = parse_annotations_xml(doc.as_bytes()).unwrap();
        assert_eq!(p.warnings.len(), 3, "{:?}", p.warnings);
        assert_eq!(p.set.annotations[0].polygon.len(), 3);
    }

    #[test]
    fn cleanup_rules() {
        let closed = vec![[0.0, 0.0], [4.0, 0.0], [4.0, 0.0], [4.0, 4.0], [0.0, 0.0]];
        assert_eq!(clean_polygon(closed).unwrap().len(), 3);
        assert!(clean_polygon(vec![[0.0, 0.0], [1.0, 1.0], [1.0, 1.0]]).is_err());
        let bowtie = vec![[0.0, 0.0], [4.0, 4.0], [4.0, 0.0], [0.0, 4.0]];
        assert!(clean_polygon(bowtie).is_err());
        let square = vec![[0.0, 0.0], [4.0, 0.0], [4.0, 4.0], [0.0, 4.0]];
        assert!(clean_polygon(square).is_ok());
    }

    #[test]
    fn bad_polygons_are_dropped_not_fatal() {
        let doc = r#"<Annotations subject="S">
            <Annotation id="line"><Vertices><Vertex x="0" y="0"/><Vertex x="4" y="0"/></Vertices></Annotation>
            <Annotation id="ok"><Vertices><Vertex x="0" y="0"/><Vertex x="4" y="0"/><Vertex x="0" y="4"/></Vertices></Annotation>
          </Annotations>"#;
        let p = parse_annotations_xml(doc.as_bytes()).unwrap();
        assert_eq!(p.set.annotations.len(), 1);
        assert!(p.warnings[0].contains("line"));
    }

    #[test]
    fn xml_round_trip() {
        let set = parse_annotations_xml(TRIANGLE.as_bytes()).unwrap().set;
        let again = parse_annotations_xml(write_annotations_xml(&set).as_bytes()).unwrap().set;
        assert_eq!(again, set);
    }

    #[test]
    fn many_polygons_keep_their_count() {
        let set = AnnotationSet {
            subject_id: "big".into(),
            annotations: (0..4000)
                .map(|i| {
                    let (x, y) = ((i % 100) as f64 * 30.0, (i / 100) as f64 * 30.0);
                    Annotation {
                        label: "plaque".into(),
                        id: Some(i.to_string()),
                        polygon: vec![[x, y], [x + 10.0, y], [x + 10.0, y + 12.0], [x, y + 9.0]],
                    }
                })
                .collect(),
        };
        let p = parse_annotations_xml(write_annotations_xml(&set).as_bytes()).unwrap();
        assert_eq!(p.set.annotations.len(), 4000);
    }
}
