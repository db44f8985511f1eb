use super::cloud::{dist2, PointCloud, Point3};
use crate::error::{Error, Result};

/// Farthest-point sampling starting from index `seed mod N`.
pub fn fps_sample(cloud: &PointCloud, n: usize, seed: u64) -> Result<Vec<usize>> {
    let len = cloud.len() as u64;
    fps_from(cloud.positions(), n, (seed % len) as usize)
}

/// Farthest-point sampling from an explicit start; each step takes the point
/// maximizing its distance to the selected set, ties to the lower index.
pub fn fps_from(points: &[Point3], n: usize, start: usize) -> Result<Vec<usize>> {
    if points.is_empty() {
        return Err(Error::EmptyInput);
    }
    if n > points.len() {
        return Err(Error::SampleTooLarge {
            requested: n,
            available: points.len(),
        });
    }
    let mut selected = Vec::with_capacity(n);
    if n == 0 {
        return Ok(selected);
    }
    let mut min_d2 = vec![f64::INFINITY; points.len()];
    let mut current = start;
    loop {
        selected.push(current);
        if selected.len() == n {
            break;
        }
        let anchor = points[current];
        let mut best = (f64::NEG_INFINITY, usize::MAX);
        for (i, p) in points.iter().enumerate() {
            let d = dist2(&anchor, p);
            if d < min_d2[i] {
                min_d2[i] = d;
            }
            if min_d2[i] > best.0 {
                best = (min_d2[i], i);
            }
        }
        current = best.1;
    }
    Ok(selected)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_corners_pick_opposite() {
        let c = PointCloud::from_positions(vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [1.0, 1.0, 0.0],
            [0.0, 1.0, 0.0],
        ])
        .unwrap();
        assert_eq!(fps_sample(&c, 2, 0).unwrap(), vec![0, 2]);
        assert_eq!(fps_sample(&c, 2, 5).unwrap(), vec![1, 3]);
    }

    #[test]
    fn full_sample_is_permutation() {
        let c = PointCloud::from_positions(
            (0..37).map(|i| [(i * 7 % 11) as f64, (i % 5) as f64, 0.0]).collect(),
        )
        .unwrap();
        let mut s = fps_sample(&c, 37, 9).unwrap();
        assert_eq!(s[0], 9);
        s.sort();
        assert_eq!(s, (0..37).collect::<Vec<_>>());
    }

    #[test]
    fn too_many() {
        let c = PointCloud::from_positions(vec![[0.0; 3]]).unwrap();
        assert!(matches!(
            fps_sample(&c, 2, 0),
            Err(Error::SampleTooLarge { .. })
        ));
    }
}
