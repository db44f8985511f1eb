//! Seeded synthetic indoor scenes for benches and tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::geometry::{Aabb, Point3, PointCloud};

#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub cloud: PointCloud,
    /// Furniture boxes standing on the floor.
    pub objects: Vec<Aabb>,
    /// Index into `objects` for each point, `None` for floor and walls.
    pub object_of_point: Vec<Option<usize>>,
}

struct Face {
    origin: Point3,
    u: Point3,
    v: Point3,
    color: Point3,
    object: Option<usize>,
}

impl Face {
    fn area(&self) -> f64 {
        let n = |a: &Point3| (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
        n(&self.u) * n(&self.v)
    }
}

fn box_faces(b: &Aabb, color: Point3, object: usize, out: &mut Vec<Face>) {
    let lo = [b.min(0), b.min(1), b.min(2)];
    let [sx, sy, sz] = b.size;
    let mut push = |origin: Point3, u: Point3, v: Point3| {
        out.push(Face {
            origin,
            u,
            v,
            color,
            object: Some(object),
        })
    };
    // top and four sides; the bottom rests on the floor
    push([lo[0], lo[1], lo[2] + sz], [sx, 0.0, 0.0], [0.0, sy, 0.0]);
    push(lo, [sx, 0.0, 0.0], [0.0, 0.0, sz]);
    push([lo[0], lo[1] + sy, lo[2]], [sx, 0.0, 0.0], [0.0, 0.0, sz]);
    push(lo, [0.0, sy, 0.0], [0.0, 0.0, sz]);
    push([lo[0] + sx, lo[1], lo[2]], [0.0, sy, 0.0], [0.0, 0.0, sz]);
}

/// A 4 m × 4 m room with floor, two walls and `num_objects` boxes, sampled
/// with `num_points` points spread by surface area.
pub fn synthetic_room(num_points: usize, num_objects: usize, seed: u64) -> Result<SyntheticScene> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut faces = vec![
        Face {
            origin: [0.0; 3],
            u: [4.0, 0.0, 0.0],
            v: [0.0, 4.0, 0.0],
            color: [0.55, 0.45, 0.35],
            object: None,
        },
        Face {
            origin: [0.0; 3],
            u: [4.0, 0.0, 0.0],
            v: [0.0, 0.0, 2.5],
            color: [0.85, 0.85, 0.8],
            object: None,
        },
        Face {
            origin: [0.0; 3],
            u: [0.0, 4.0, 0.0],
            v: [0.0, 0.0, 2.5],
            color: [0.8, 0.85, 0.85],
            object: None,
        },
    ];
    let mut objects = Vec::with_capacity(num_objects);
    for o in 0..num_objects {
        let size = [
            rng.random_range(0.4..1.0),
            rng.random_range(0.4..1.0),
            rng.random_range(0.3..1.2),
        ];
        // grid slots keep boxes apart
        let slot = o % 9;
        let cx = 0.9 + (slot % 3) as f64 * 1.2 + rng.random_range(-0.1..0.1);
        let cy = 0.9 + (slot / 3) as f64 * 1.2 + rng.random_range(-0.1..0.1);
        let b = Aabb::new([cx, cy, 0.5 * size[2]], size)?;
        let color = [rng.random(), rng.random(), rng.random()];
        box_faces(&b, color, o, &mut faces);
        objects.push(b);
    }

    let total_area: f64 = faces.iter().map(Face::area).sum();
    let mut positions = Vec::with_capacity(num_points);
    let mut colors = Vec::with_capacity(num_points);
    let mut object_of_point = Vec::with_capacity(num_points);
    for _ in 0..num_points {
        let mut pick = rng.random_range(0.0..total_area);
        let face = faces
            .iter()
            .find(|f| {
                pick -= f.area();
                pick < 0.0
            })
            .unwrap_or(&faces[faces.len() - 1]);
        let (a, b): (f64, f64) = (rng.random(), rng.random());
        let p: [f64; 3] = std::array::from_fn(|ax| {
            face.origin[ax] + a * face.u[ax] + b * face.v[ax] + rng.random_range(-0.002..0.002)
        });
        let c = face
            .color
            .map(|c: f64| (c + rng.random_range(-0.03..0.03)).clamp(0.0, 1.0));
        positions.push(p);
        colors.push(c);
        object_of_point.push(face.object);
    }
    Ok(SyntheticScene {
        cloud: PointCloud::new(positions, colors)?,
        objects,
        object_of_point,
    })
}
