mod common;

use common::mjcf::*;

use std::collections::BTreeMap;
use std::f64::consts::PI;

use robomorph::compiler::*;
use robomorph::components::*;

fn record(text: &str) -> DesignRecord {
    parse_design_text(text).unwrap()
}

const HUT: &str = "STRUCTURAL RULES:\nStep 1: r0) S\nStep 2: r1) H-B-T\nStep 3: r4) H-U-T\n\nCOMPONENT RULES:\n[null]-[body=15cm]-[null]\n\nREASONING:\nOne torso.\n";

fn knee_leg(knee: &str, end: &str) -> DesignRecord {
    record(&format!(
        "STRUCTURAL RULES:\nStep 1: r0) S\nStep 2: r1) H-B-T\nStep 3: r3) H-U-(C-M-E)-T\nStep 4: r5) H-U-(C-M-J-L-E)-T\n\nCOMPONENT RULES:\n[null]-[body=15cm]-([connector]-[mount]-[{knee}]-[limb=12cm]-[{end}])-[null]\n\nREASONING:\nLeg.\n"
    ))
}

/// Four actuated hinges: a roll between two segments, a knee, an elbow and
/// a limb roll; plus one wheel.
fn four_actuators() -> DesignRecord {
    record(
        "STRUCTURAL RULES:\nStep 1: r0) S\nStep 2: r1) H-B-T\nStep 3: r2) H-B-Y-B-T\nStep 4: r3) H-U-(C-M-E)-Y-B-T\nStep 5: r3) H-U-(C-M-E)-Y-U-(C-M-E)-T\nStep 6: r5) H-U-(C-M-J-L-E)-Y-U-(C-M-E)-T\nStep 7: r5) H-U-(C-M-J-L-E)-Y-U-(C-M-J-L-E)-T\nStep 8: r5) H-U-(C-M-J-L-J-L-E)-Y-U-(C-M-J-L-E)-T\n\nCOMPONENT RULES:\n[null]-[body=15cm]-([connector]-[mount]-[knee=45deg]-[limb=10cm]-[elbow=90deg]-[limb=15cm]-[null])-[roll]-[body=15cm]-([connector]-[mount]-[roll]-[limb=11cm]-[wheel])-[null]\n\nREASONING:\nx\n",
    )
}

#[test]
fn single_torso() {
    let m = compile(&record(HUT), false).unwrap();
    assert_eq!(m.bodies.len(), 1);
    assert!(m.joints.is_empty());
    assert!(m.actuators.is_empty());
    let xml = emit_mjcf(&m);
    let doc = roxmltree::Document::parse(&xml).unwrap();
    let world = doc.descendants().find(|n| n.has_tag_name("worldbody")).unwrap();
    assert_eq!(world.descendants().filter(|n| n.has_tag_name("body")).count(), 1);
    assert_eq!(xml, emit_mjcf(&compile(&record(HUT), false).unwrap()));
}

#[test]
fn knee_leg_lowering() {
    let m = compile(&knee_leg("knee=60deg", "null"), false).unwrap();
    assert_eq!(m.bodies.len(), 3);
    assert_eq!(m.actuators.len(), 1);
    let hinge = m.actuated_joints().next().unwrap();
    assert_eq!(hinge.kind, JointKind::Hinge);
    assert_eq!(hinge.axis, [0.0, 1.0, 0.0]);
    let [lo, hi] = hinge.range.unwrap();
    assert_eq!(lo, 0.0);
    assert!((hi - 1.0471975511965976).abs() < 1e-12);
    // Limb capsule of 12 cm hanging from a mount 5 cm to the side.
    let limb = &m.bodies[1];
    assert_eq!(limb.pos, [0.0, -MOUNT_OFFSET, 0.0]);
    assert!(matches!(limb.geom, Geom::Capsule { radius, to, .. } if radius == LIMB_RADIUS && to[2] == -0.12));
}

#[test]
fn wheels_are_unactuated() {
    let m = compile(&knee_leg("rigid", "wheel"), false).unwrap();
    assert!(m.actuators.is_empty());
    let wheel = m.joints.iter().find(|j| j.kind == JointKind::FreeWheel).unwrap();
    assert_eq!(wheel.range, None);
    assert_eq!(wheel.axis, [0.0, 1.0, 0.0]);
    assert!(matches!(m.bodies[wheel.body].geom, Geom::Cylinder { radius, .. } if radius == WHEEL_RADIUS));
}

#[test]
fn joint_ranges_by_kind() {
    let m = compile(&four_actuators(), false).unwrap();
    assert_eq!(m.actuators.len(), 4);
    let by_name: BTreeMap<&str, &Joint> = m.joints.iter().map(|j| (j.name.as_str(), j)).collect();
    let roll = by_name["joint_2"];
    assert_eq!(roll.range, Some([-PI, PI]));
    let elbow = m
        .actuated_joints()
        .find(|j| j.range.is_some_and(|r| (r[1] - PI / 2.0).abs() < 1e-12))
        .unwrap();
    assert_eq!(elbow.axis, [0.0, 1.0, 0.0]);
    let limb_roll = m.actuated_joints().find(|j| j.axis == [0.0, 0.0, 1.0]).unwrap();
    assert_eq!(limb_roll.range, Some([-PI, PI]));
    let xml = emit_mjcf(&m);
    let doc = roxmltree::Document::parse(&xml).unwrap();
    assert_eq!(doc.descendants().filter(|n| n.has_tag_name("motor")).count(), 4);
}

#[test]
fn body_joint_axes() {
    let text = |y: &str| {
        format!("STRUCTURAL RULES:\nStep 1: r0) S\nStep 2: r1) H-B-T\nStep 3: r2) H-B-Y-B-T\nStep 4: r4) H-U-Y-B-T\nStep 5: r4) H-U-Y-U-T\n\nCOMPONENT RULES:\n[null]-[body=15cm]-[{y}]-[body=15cm]-[null]\n\nREASONING:\nx\n")
    };
    let axis = |y: &str| {
        let m = compile(&record(&text(y)), false).unwrap();
        assert_eq!(m.bodies.len(), 2);
        assert_eq!(m.bodies[1].pos, [BODY_LENGTH, 0.0, 0.0]);
        (m.joints[0].kind, m.joints[0].axis, m.actuators.len())
    };
    assert_eq!(axis("rigid"), (JointKind::Fixed, [0.0, 1.0, 0.0], 0));
    assert_eq!(axis("roll"), (JointKind::Hinge, [0.0, 1.0, 0.0], 1));
    assert_eq!(axis("twist"), (JointKind::Hinge, [1.0, 0.0, 0.0], 1));
}

#[test]
fn corruption_diagnostics() {
    assert_eq!(is_corrupted(&record(HUT)), None);
    let mut bad = knee_leg("knee=30deg", "null");
    let addr = bad
        .components
        .iter()
        .find(|(_, c)| matches!(c, Component::LimbJoint(_)))
        .map(|(a, _)| a.clone())
        .unwrap();
    bad.components.insert(addr, Component::LimbJoint(LimbJoint::Knee(70.0)));
    assert_eq!(is_corrupted(&bad).unwrap().stage, CorruptionStage::Components);
    let mut short = record(HUT);
    short.derivation.steps.pop();
    assert_eq!(is_corrupted(&short).unwrap().stage, CorruptionStage::Derivation);
    let bogus = HUT.replace("Step 3: r4) H-U-T", "Step 3: r4) H-U-U-T");
    let err = parse_design_text(&bogus).unwrap_err();
    assert_eq!(Corruption::from(&err).stage, CorruptionStage::Derivation);
}

#[test]
fn model_invariants_on_random_designs() {
    for seed in 0..300 {
        let r = common::random_record(seed);
        let m = compile(&r, seed % 2 == 0).unwrap();
        assert_eq!(m.actuators.len(), expected_actuators(&r), "{}", m.name);
        assert_eq!(m.bodies.len(), expected_bodies(&r), "{}", m.name);
        assert_eq!(m.bodies.iter().filter(|b| b.parent.is_none()).count(), 1);
        for (i, b) in m.bodies.iter().enumerate() {
            assert!(b.parent.is_none_or(|p| p < i));
            assert!(b.mass > 0.0);
            assert!(b.geom.volume() > 0.0);
        }
        assert!((m.total_mass() - m.bodies.iter().map(|b| b.mass).sum::<f64>()).abs() < 1e-15);
        for a in &m.actuators {
            assert_eq!(m.joints[a.joint].kind, JointKind::Hinge);
            assert_eq!(a.gear, TORQUE_MAX);
        }
        for i in 0..m.bodies.len() {
            let kids: Vec<usize> = m.children(i).collect();
            for (x, &a) in kids.iter().enumerate() {
                for &b in &kids[x + 1..] {
                    assert_ne!(m.bodies[a].pos, m.bodies[b].pos, "{}", m.name);
                }
            }
        }
        let (lo, _) = m.z_extent();
        assert!((lo - SPAWN_CLEARANCE).abs() < 1e-12);
        assert_eq!(compile(&r, seed % 2 == 0).unwrap(), m);
    }
}

#[test]
fn xml_parse_back_matches_model() {
    for seed in 1000..1200 {
        let m = compile(&common::random_record(seed), false).unwrap();
        let c = parse_back(&emit_mjcf(&m));
        assert_eq!(c.bodies, m.bodies.len());
        assert_eq!(c.hinges, m.joints.iter().filter(|j| j.kind != JointKind::Fixed).count());
        assert_eq!(c.motors, m.actuators.len());
        let moving: BTreeMap<&str, &Joint> = m
            .joints
            .iter()
            .filter(|j| j.kind != JointKind::Fixed)
            .map(|j| (j.name.as_str(), j))
            .collect();
        assert_eq!(c.ranges.len(), moving.len());
        for (name, range) in &c.ranges {
            match (range, moving[name.as_str()].range) {
                (None, None) => {}
                (Some(a), Some(b)) => {
                    assert!((a[0] - b[0]).abs() < 1e-9 && (a[1] - b[1]).abs() < 1e-9, "{name}");
                }
                other => panic!("{name}: {other:?}"),
            }
        }
    }
}

#[test]
fn collision_toggle_only_changes_contact_bits() {
    for seed in 2000..2200 {
        let r = common::random_record(seed);
        let on = emit_mjcf(&compile(&r, true).unwrap());
        let off = emit_mjcf(&compile(&r, false).unwrap());
        assert_eq!(skeleton(&on), skeleton(&off));
        let doc = roxmltree::Document::parse(&off).unwrap();
        for g in doc.descendants().filter(|n| n.has_tag_name("geom")) {
            let contype: u32 = g.attribute("contype").unwrap().parse().unwrap();
            let conaffinity: u32 = g.attribute("conaffinity").unwrap().parse().unwrap();
            if g.attribute("name") != Some("floor") {
                // No robot pair can collide, but every robot geom meets the floor.
                assert_eq!(contype & conaffinity, 0);
                assert_ne!(contype & 3, 0);
            }
        }
    }
}
