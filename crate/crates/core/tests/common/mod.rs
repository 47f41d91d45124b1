#![allow(dead_code)]

use std::path::PathBuf;

use lenslex::prescription::{parse, Material, Prescription, SpecHeader, Surface, SurfaceTag};
use proptest::prelude::*;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn read_fixture(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap()
}

pub fn parse_fixture(name: &str) -> Prescription {
    parse(&read_fixture(name)).unwrap()
}

/// Every ODDL fixture that should parse.
pub const ODDL_FIXTURES: [&str; 5] = [
    "table1.oddl",
    "table1_no_stop.oddl",
    "perfect_singlet.oddl",
    "thick_lens.oddl",
    "plate.oddl",
];

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}

/// 2x2 ray matrix over the reduced ray `(y, n u)`.
pub type Mat = [[f64; 2]; 2];

pub fn mul(a: Mat, b: Mat) -> Mat {
    [
        [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
        [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
    ]
}

fn refraction(power: f64) -> Mat {
    [[1.0, 0.0], [-power, 1.0]]
}

fn transfer(reduced_thickness: f64) -> Mat {
    [[1.0, reduced_thickness], [0.0, 1.0]]
}

fn index_of(s: &Surface) -> f64 {
    s.material.as_ref().and_then(|m| m.n_d).unwrap()
}

fn curvature(r: f64) -> f64 {
    if r.is_infinite() {
        0.0
    } else {
        1.0 / r
    }
}

/// Product of refraction and transfer matrices from the vertex of row 1 up to
/// the vertex plane of row `end` (exclusive), together with the index of the
/// medium arriving there.
pub fn matrix_to(p: &Prescription, end: usize) -> (Mat, f64) {
    let mut n = index_of(&p.surfaces[0]);
    let mut m: Mat = [[1.0, 0.0], [0.0, 1.0]];
    for s in &p.surfaces[1..end] {
        let n_after = index_of(s);
        m = mul(refraction((n_after - n) * curvature(s.radius.unwrap())), m);
        m = mul(transfer(s.thickness.unwrap() / n_after), m);
        n = n_after;
    }
    (m, n)
}

/// Ray `(y, u)` on the vertex plane of row `end` for a launch on row 1.
pub fn matrix_ray(p: &Prescription, end: usize, y0: f64, u0: f64) -> (f64, f64) {
    let (m, n_end) = matrix_to(p, end);
    let n0 = index_of(&p.surfaces[0]);
    let y = m[0][0] * y0 + m[0][1] * n0 * u0;
    let nu = m[1][0] * y0 + m[1][1] * n0 * u0;
    (y, nu / n_end)
}

/// EFFL, BFL and marginal image height from the matrix oracle.
pub fn matrix_first_order(p: &Prescription, y0: f64) -> (f64, f64, f64) {
    let image = p.surfaces.len() - 1;
    let (m, _) = matrix_to(p, image);
    let c = m[1][0];
    let t_last = p.surfaces[image - 1].thickness.unwrap();
    let a_last = m[0][0] - t_last * c;
    let effl = -1.0 / c;
    let bfl = -a_last / c;
    let (y_img, _) = matrix_ray(p, image, y0, 0.0);
    (effl, bfl, y_img)
}

/// Launch height on row 1 reaching `target` at the stop for slope `u0`,
/// solved from the matrix elements of the partial system.
pub fn matrix_stop_launch(p: &Prescription, u0: f64, target: f64) -> f64 {
    let stop = p.stop_index().unwrap();
    let (m, _) = matrix_to(p, stop);
    let n0 = index_of(&p.surfaces[0]);
    (target - m[0][1] * n0 * u0) / m[0][0]
}

/// Thick lens in air: `1/f = (n-1)(1/R1 - 1/R2) + (n-1)^2 d / (n R1 R2)`.
pub fn thick_lens_effl(r1: f64, r2: f64, d: f64, n: f64) -> f64 {
    let c1 = curvature(r1);
    let c2 = curvature(r2);
    1.0 / ((n - 1.0) * (c1 - c2) + (n - 1.0).powi(2) * d * c1 * c2 / n)
}

pub fn image_row() -> Surface {
    Surface {
        tag: SurfaceTag::Image,
        radius: Some(f64::INFINITY),
        thickness: None,
        material: None,
        semi_diameter: None,
    }
}

pub fn object_row() -> Surface {
    Surface::new(SurfaceTag::Object, f64::INFINITY, f64::INFINITY, Material::air())
}

/// Front stop, a glass singlet and an air gap to the image plane.
pub fn singlet(r1: f64, r2: f64, d: f64, n: f64, back: f64) -> Prescription {
    Prescription::new(
        SpecHeader::default(),
        vec![
            object_row(),
            Surface::new(SurfaceTag::Stop, f64::INFINITY, 0.0, Material::air()).with_semi_diameter(5.0),
            Surface::new(SurfaceTag::Standard(1), r1, d, Material::inline_glass(n, 50.0)),
            Surface::new(SurfaceTag::Standard(2), r2, back, Material::air()),
            image_row(),
        ],
    )
}

/// Signed radius with |R| in [lo, hi], or plano.
pub fn radius(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    prop_oneof![
        4 => (lo..hi, any::<bool>()).prop_map(|(r, neg)| if neg { -r } else { r }),
        1 => Just(f64::INFINITY),
    ]
}

#[derive(Debug, Clone)]
pub struct ElementSpec {
    pub r1: f64,
    pub r2: f64,
    pub thickness: f64,
    pub n: f64,
    pub gap: f64,
}

pub fn element() -> impl Strategy<Value = ElementSpec> {
    (radius(15.0, 300.0), radius(15.0, 300.0), 0.5f64..12.0, 1.45f64..1.95, 0.5f64..25.0)
        .prop_map(|(r1, r2, thickness, n, gap)| ElementSpec { r1, r2, thickness, n, gap })
}

/// Multi-element system of 1 to 4 glass elements with a plano stop inserted
/// in front of element `stop_slot` (or behind the last one).
pub fn multi_element() -> impl Strategy<Value = Prescription> {
    (prop::collection::vec(element(), 1..=4), any::<prop::sample::Index>(), 20.0f64..150.0).prop_map(
        |(elements, slot, back)| {
            let stop_slot = slot.index(elements.len() + 1);
            let mut rows = vec![object_row()];
            let mut tag = 0u32;
            let mut next_tag = || {
                tag += 1;
                SurfaceTag::Standard(tag)
            };
            let count = elements.len();
            for (k, e) in elements.into_iter().enumerate() {
                if k == stop_slot {
                    rows.push(Surface::new(SurfaceTag::Stop, f64::INFINITY, 1.0, Material::air()).with_semi_diameter(4.0));
                }
                rows.push(Surface::new(next_tag(), e.r1, e.thickness, Material::inline_glass(e.n, 50.0)));
                let gap = if k + 1 == count && stop_slot != count { back } else { e.gap };
                rows.push(Surface::new(next_tag(), e.r2, gap, Material::air()));
            }
            if stop_slot == count {
                rows.push(Surface::new(SurfaceTag::Stop, f64::INFINITY, back, Material::air()).with_semi_diameter(4.0));
            }
            rows.push(image_row());
            Prescription::new(SpecHeader::default(), rows)
        },
    )
}
