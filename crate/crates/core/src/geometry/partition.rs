use super::cover::Cover;
use super::path::Path;
use crate::error::{Error, Result};

/// Safety margin on set clearance used when cutting a path into pieces.
pub const CLEARANCE_MARGIN: f64 = 1e-3;

/// Sample spacing of the greedy decomposition.
pub const PARTITION_STEP: f64 = 1e-3;

/// Resolution of the bisected cut points.
pub const CUT_RESOLUTION: f64 = 1e-6;

/// Breakpoints `0 = t_0 < ... < t_n = 1` with a cover set per piece.
#[derive(Debug, Clone, PartialEq)]
pub struct PathPartition {
    breakpoints: Vec<f64>,
    assignment: Vec<usize>,
}

impl PathPartition {
    pub fn new(breakpoints: Vec<f64>, assignment: Vec<usize>) -> Result<Self> {
        let ok = breakpoints.len() == assignment.len() + 1
            && !assignment.is_empty()
            && breakpoints.first() == Some(&0.0)
            && breakpoints.last() == Some(&1.0)
            && breakpoints.windows(2).all(|w| w[0] < w[1]);
        if !ok {
            return Err(Error::InvalidReparam("malformed path partition".into()));
        }
        Ok(Self {
            breakpoints,
            assignment,
        })
    }

    pub fn single(set: usize) -> Self {
        Self {
            breakpoints: vec![0.0, 1.0],
            assignment: vec![set],
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// `(t_start, t_end, set)` for each piece.
    pub fn pieces(&self) -> impl Iterator<Item = (f64, f64, usize)> + '_ {
        self.breakpoints
            .windows(2)
            .zip(&self.assignment)
            .map(|(w, s)| (w[0], w[1], *s))
    }

    /// Splits piece `piece` at the interior parameter `t`, keeping its set.
    pub fn refine(&self, piece: usize, t: f64) -> Result<Self> {
        let (a, b) = (self.breakpoints[piece], self.breakpoints[piece + 1]);
        if !(t > a && t < b) {
            return Err(Error::InvalidReparam(format!("split point {t} outside piece")));
        }
        let mut breakpoints = self.breakpoints.clone();
        breakpoints.insert(piece + 1, t);
        let mut assignment = self.assignment.clone();
        assignment.insert(piece, self.assignment[piece]);
        Self::new(breakpoints, assignment)
    }

    /// Assigns piece `piece` to another set.
    pub fn reassign(&self, piece: usize, set: usize) -> Self {
        let mut out = self.clone();
        out.assignment[piece] = set;
        out
    }

    /// Checks every piece lies in its set with positive clearance.
    pub fn validate(&self, path: &Path, cover: &Cover) -> Result<()> {
        for (a, b, set) in self.pieces() {
            let set = cover.set(set)?;
            for t in path.sample_params(a, b) {
                if set.clearance(&path.at(t)) <= 0.0 {
                    return Err(Error::NoCoveringSet { t });
                }
            }
        }
        Ok(())
    }
}

/// Greedy decomposition: starting from the set of largest clearance, extend
/// each piece while that set keeps clearance above [`CLEARANCE_MARGIN`], and
/// bisect the exit point.
pub fn decompose_path(path: &Path, cover: &Cover) -> Result<PathPartition> {
    let steps = (1.0 / PARTITION_STEP).round() as usize;
    let mut breakpoints = vec![0.0];
    let mut assignment = Vec::new();
    let mut start = 0.0f64;
    loop {
        let (set_id, c) = cover.best_set(&path.at(start));
        if c <= CLEARANCE_MARGIN {
            return Err(Error::NoCoveringSet { t: start });
        }
        let set = cover.set(set_id)?;
        let inside = |t: f64| set.clearance(&path.at(t)) > CLEARANCE_MARGIN;
        let first = ((start / PARTITION_STEP).floor() as usize + 1).min(steps);
        let mut last_good = start;
        let mut exit = None;
        for k in first..=steps {
            let t = k as f64 * PARTITION_STEP;
            if inside(t) {
                last_good = t;
            } else {
                exit = Some(t);
                break;
            }
        }
        assignment.push(set_id);
        let Some(bad) = exit else {
            breakpoints.push(1.0);
            break;
        };
        let (mut lo, mut hi) = (last_good, bad);
        while hi - lo > CUT_RESOLUTION {
            let mid = 0.5 * (lo + hi);
            if inside(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        if lo <= start + 1e-12 {
            return Err(Error::NoCoveringSet { t: start });
        }
        breakpoints.push(lo);
        start = lo;
    }
    PathPartition::new(breakpoints, assignment)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::path::Path;
    use nalgebra::Vector3;

    #[test]
    fn path_inside_one_set_is_one_piece() {
        let cover = Cover::two_caps(0.3);
        let g = Path::latitude(0.6, 0.0);
        let p = decompose_path(&g, &cover).unwrap();
        assert_eq!(p.assignment(), &[0]);
        p.validate(&g, &cover).unwrap();
    }

    #[test]
    fn meridian_cuts_inside_the_overlap() {
        let cover = Cover::two_caps(0.3);
        let g = Path::meridian(0.4, 0.0, std::f64::consts::PI);
        let p = decompose_path(&g, &cover).unwrap();
        assert_eq!(p.assignment(), &[0, 1]);
        let cut = g.at(p.breakpoints()[1]);
        assert!(cut.z.abs() < 0.3);
        p.validate(&g, &cover).unwrap();
    }

    #[test]
    fn equator_goes_to_the_first_cap_on_ties() {
        let cover = Cover::two_caps(0.3);
        let p = decompose_path(&Path::equator(), &cover).unwrap();
        assert_eq!(p.assignment(), &[0]);
    }

    #[test]
    fn plane_paths_through_several_quadrants() {
        let cover = Cover::plane_grid(0.25);
        let g = Path::segment(Vector3::new(-1.5, -1.2, 0.0), Vector3::new(1.4, 1.1, 0.0));
        let p = decompose_path(&g, &cover).unwrap();
        assert!(p.len() >= 2);
        p.validate(&g, &cover).unwrap();
        let refined = p.refine(0, 0.5 * p.breakpoints()[1]).unwrap();
        refined.validate(&g, &cover).unwrap();
        assert_eq!(refined.len(), p.len() + 1);
    }

    #[test]
    fn malformed_partitions_are_rejected() {
        assert!(PathPartition::new(vec![0.0, 0.6, 0.4, 1.0], vec![0, 0, 0]).is_err());
        assert!(PathPartition::new(vec![0.0, 1.0], vec![]).is_err());
    }
}
