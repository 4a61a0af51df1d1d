use std::fmt::Write;

use super::{Geom, JointKind, RobotModel, Vec3};

/// C `%g` formatting with 6 significant digits.
pub fn format_g(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_finite() { "0".into() } else { x.to_string() };
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mantissa}e{sign}{:02}", exp.abs());
    }
    trim_zeros(&format!("{x:.*}", (5 - exp) as usize)).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn vec(v: Vec3) -> String {
    format!("{} {} {}", format_g(v[0]), format_g(v[1]), format_g(v[2]))
}

fn contact_attrs(collisions: bool) -> &'static str {
    // Terrain has conaffinity 3, so robot geoms on bit 2 still touch it but
    // never each other.
    if collisions {
        r#"contype="1" conaffinity="1""#
    } else {
        r#"contype="2" conaffinity="1""#
    }
}

/// Serializes the model. Angles are written in degrees.
pub fn emit_mjcf(model: &RobotModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, r#"<mujoco model="{}">"#, xml_escape(&model.name));
    out.push_str("  <compiler angle=\"degree\"/>\n");
    out.push_str("  <option timestep=\"0.002\" gravity=\"0 0 -9.81\"/>\n");
    out.push_str("  <worldbody>\n");
    out.push_str(
        "    <geom name=\"floor\" type=\"plane\" size=\"0 0 0.1\" contype=\"1\" conaffinity=\"3\"/>\n",
    );
    if !model.bodies.is_empty() {
        emit_body(model, 0, 2, &mut out);
    }
    out.push_str("  </worldbody>\n");
    if !model.actuators.is_empty() {
        out.push_str("  <actuator>\n");
        for a in &model.actuators {
            let _ = writeln!(
                out,
                r#"    <motor name="{}" joint="{}" gear="{}" ctrllimited="true" ctrlrange="-1 1"/>"#,
                a.name,
                model.joints[a.joint].name,
                format_g(a.gear)
            );
        }
        out.push_str("  </actuator>\n");
    }
    out.push_str("</mujoco>\n");
    out
}

fn emit_body(model: &RobotModel, index: usize, depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth);
    let body = &model.bodies[index];
    let _ = writeln!(out, r#"{pad}<body name="{}" pos="{}">"#, body.name, vec(body.pos));
    if index == 0 {
        let _ = writeln!(out, r#"{pad}  <freejoint name="root"/>"#);
    }
    for j in model.joints.iter().filter(|j| j.body == index) {
        match j.kind {
            JointKind::Fixed => {}
            JointKind::Hinge | JointKind::FreeWheel => {
                let _ = write!(
                    out,
                    r#"{pad}  <joint name="{}" type="hinge" pos="{}" axis="{}""#,
                    j.name,
                    vec(j.pos),
                    vec(j.axis)
                );
                match j.range {
                    Some([lo, hi]) => {
                        let _ = write!(
                            out,
                            r#" limited="true" range="{} {}""#,
                            format_g(lo.to_degrees()),
                            format_g(hi.to_degrees())
                        );
                    }
                    None => out.push_str(r#" limited="false""#),
                }
                out.push_str("/>\n");
            }
        }
    }
    let contact = contact_attrs(model.collisions_enabled);
    let mass = format_g(body.mass);
    let geom = match body.geom {
        Geom::Capsule { radius, from, to } => format!(
            r#"type="capsule" fromto="{} {}" size="{}""#,
            vec(from),
            vec(to),
            format_g(radius)
        ),
        Geom::Sphere { radius, center } => format!(
            r#"type="sphere" pos="{}" size="{}""#,
            vec(center),
            format_g(radius)
        ),
        Geom::Cylinder {
            radius,
            half_width,
            center,
            axis,
        } => {
            let a = [
                center[0] - axis[0] * half_width,
                center[1] - axis[1] * half_width,
                center[2] - axis[2] * half_width,
            ];
            let b = [
                center[0] + axis[0] * half_width,
                center[1] + axis[1] * half_width,
                center[2] + axis[2] * half_width,
            ];
            format!(
                r#"type="cylinder" fromto="{} {}" size="{}""#,
                vec(a),
                vec(b),
                format_g(radius)
            )
        }
    };
    let _ = writeln!(
        out,
        r#"{pad}  <geom name="{}" {geom} mass="{mass}" {contact}/>"#,
        body.name
    );
    for child in model.children(index) {
        emit_body(model, child, depth + 1, out);
    }
    let _ = writeln!(out, "{pad}</body>");
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}
