//! Independent readings of compiled models and their XML.

use robomorph::components::{BodyJoint, Component, DesignRecord, LimbJoint};

/// Actuators counted straight from the assignment.
pub fn expected_actuators(r: &DesignRecord) -> usize {
    r.components
        .iter()
        .filter(|(_, c)| {
            matches!(
                c,
                Component::BodyJoint(BodyJoint::Roll | BodyJoint::Twist)
                    | Component::LimbJoint(LimbJoint::Roll | LimbJoint::Knee(_) | LimbJoint::Elbow(_))
            )
        })
        .count()
}

pub fn expected_bodies(r: &DesignRecord) -> usize {
    r.components
        .iter()
        .filter(|(_, c)| matches!(c, Component::Body(_) | Component::Limb(_) | Component::End(_)))
        .count()
}

pub struct Counts {
    pub bodies: usize,
    pub hinges: usize,
    pub motors: usize,
    pub ranges: Vec<(String, Option<[f64; 2]>)>,
}

pub fn parse_back(xml: &str) -> Counts {
    let doc = roxmltree::Document::parse(xml).unwrap();
    let degrees = doc
        .descendants()
        .find(|n| n.has_tag_name("compiler"))
        .and_then(|n| n.attribute("angle"))
        == Some("degree");
    assert!(degrees);
    let mut ranges = Vec::new();
    for j in doc.descendants().filter(|n| n.has_tag_name("joint")) {
        let range = j.attribute("range").map(|r| {
            let v: Vec<f64> = r.split_whitespace().map(|x| x.parse::<f64>().unwrap().to_radians()).collect();
            [v[0], v[1]]
        });
        ranges.push((j.attribute("name").unwrap().to_string(), range));
    }
    Counts {
        bodies: doc.descendants().filter(|n| n.has_tag_name("body")).count(),
        hinges: doc
            .descendants()
            .filter(|n| n.has_tag_name("joint") && n.attribute("type") == Some("hinge"))
            .count(),
        motors: doc.descendants().filter(|n| n.has_tag_name("motor")).count(),
        ranges,
    }
}

/// Every element and attribute, with robot contact bits blanked out.
pub fn skeleton(xml: &str) -> Vec<String> {
    let doc = roxmltree::Document::parse(xml).unwrap();
    doc.descendants()
        .filter(|n| n.is_element())
        .map(|n| {
            let robot_geom = n.has_tag_name("geom") && n.attribute("name") != Some("floor");
            let attrs: Vec<String> = n
                .attributes()
                .map(|a| {
                    if robot_geom && matches!(a.name(), "contype" | "conaffinity") {
                        format!("{}=*", a.name())
                    } else {
                        format!("{}={}", a.name(), a.value())
                    }
                })
                .collect();
            format!("{} {}", n.tag_name().name(), attrs.join(" "))
        })
        .collect()
}
