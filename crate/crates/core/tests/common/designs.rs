use robomorph::components::{parse_design_text, DesignRecord};

pub const HUT: &str = "STRUCTURAL RULES:\nStep 1: r0) S\nStep 2: r1) H-B-T\nStep 3: r4) H-U-T\n\nCOMPONENT RULES:\n[null]-[body=15cm]-[null]\n\nREASONING:\nOne torso.\n";

pub const KNEE_WHEEL: &str = "STRUCTURAL RULES:\nStep 1: r0) S\nStep 2: r1) H-B-T\nStep 3: r3) H-U-(C-M-E)-T\nStep 4: r5) H-U-(C-M-J-L-E)-T\n\nCOMPONENT RULES:\n[null]-[body=15cm]-([connector]-[mount]-[knee=60deg]-[limb=12cm]-[wheel])-[null]\n\nREASONING:\nA wheeled leg.\n";

pub const TWO_LEGS: &str = "STRUCTURAL RULES:\nStep 1: r0) S\nStep 2: r1) H-B-T\nStep 3: r2) H-B-Y-B-T\nStep 4: r3) H-U-(C-M-E)-Y-B-T\nStep 5: r3) H-U-(C-M-E)-Y-U-(C-M-E)-T\nStep 6: r5) H-U-(C-M-J-L-E)-Y-U-(C-M-E)-T\nStep 7: r5) H-U-(C-M-J-L-E)-Y-U-(C-M-J-L-E)-T\n\nCOMPONENT RULES:\n[null]-[body=15cm]-([connector]-[mount]-[elbow=90deg]-[limb=12cm]-[null])-[roll]-[body=15cm]-([connector]-[mount]-[knee=60deg]-[limb=14cm]-[null])-[null]\n\nREASONING:\nTwo legs.\n";

pub const TWIST: &str = "STRUCTURAL RULES:\nStep 1: r0) S\nStep 2: r1) H-B-T\nStep 3: r2) H-B-Y-B-T\nStep 4: r4) H-U-Y-B-T\nStep 5: r4) H-U-Y-U-T\n\nCOMPONENT RULES:\n[null]-[body=15cm]-[twist]-[body=15cm]-[null]\n\nREASONING:\nx\n";

pub fn record(text: &str) -> DesignRecord {
    parse_design_text(text).unwrap()
}

/// A stilt of two 15 cm links; taller than the beam clearance.
pub const STILT: &str = "STRUCTURAL RULES:\nStep 1: r0) S\nStep 2: r1) H-B-T\nStep 3: r3) H-U-(C-M-E)-T\nStep 4: r5) H-U-(C-M-J-L-E)-T\nStep 5: r5) H-U-(C-M-J-L-J-L-E)-T\n\nCOMPONENT RULES:\n[null]-[body=15cm]-([connector]-[mount]-[rigid]-[limb=15cm]-[rigid]-[limb=15cm]-[null])-[null]\n\nREASONING:\nTall.\n";
