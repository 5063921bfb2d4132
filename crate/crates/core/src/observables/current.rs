use super::FrameShift;
use crate::engine::{JumpEvent, JumpObserver};
use crate::error::{Error, Result};
use crate::lattice::Configuration;

/// Signed particle currents through fixed bonds and through bonds that
/// move with the frame.
///
/// A moving bond starts at an origin x and sits at x + ⌊d_lat(t)⌋. Jumps
/// across its current position are counted as for a fixed bond; each time
/// the frame advances one site to the right, the occupation of the site left
/// behind is subtracted (that particle crossed the bond without jumping), and
/// symmetrically added when the frame moves left.
#[derive(Debug, Clone)]
pub struct CurrentTally {
    len: usize,
    fixed: Vec<i64>,
    tracked: Vec<bool>,
    frame: FrameShift,
    origins: Vec<usize>,
    offset: i64,
    accum: Vec<i64>,
    base: Vec<i64>,
    error: Option<(i64, usize)>,
}

impl CurrentTally {
    /// Track every bond of a torus with `len` sites.
    pub fn new(len: usize, frame: FrameShift) -> Self {
        CurrentTally {
            len,
            fixed: vec![0; len],
            tracked: vec![true; len],
            frame,
            origins: Vec::new(),
            offset: 0,
            accum: Vec::new(),
            base: Vec::new(),
            error: None,
        }
    }

    /// Track only the listed bonds; moving currents then need every bond on their path.
    pub fn with_bonds(len: usize, bonds: &[usize], frame: FrameShift) -> Self {
        let mut tally = Self::new(len, frame);
        tally.tracked = vec![false; len];
        for &b in bonds {
            tally.tracked[b % len] = true;
        }
        tally
    }

    /// Register moving bonds starting at `origins` (must be called at t = 0).
    pub fn with_moving(mut self, origins: &[usize]) -> Self {
        self.origins = origins.iter().map(|x| x % self.len).collect();
        self.accum = vec![0; self.origins.len()];
        self.base = vec![0; self.origins.len()];
        self
    }

    pub fn origins(&self) -> &[usize] {
        &self.origins
    }

    pub fn frame(&self) -> &FrameShift {
        &self.frame
    }

    #[inline]
    fn site(&self, x: i64) -> usize {
        x.rem_euclid(self.len as i64) as usize
    }

    /// Move the frame to ⌊d_lat(t)⌋ using occupations from `occ`.
    fn advance(&mut self, t: f64, occ: impl Fn(usize) -> u8) {
        if self.origins.is_empty() || self.error.is_some() {
            return;
        }
        let target = self.frame.lattice_offset(t);
        while self.offset != target {
            let step = if target > self.offset { 1 } else { -1 };
            for i in 0..self.origins.len() {
                let x = self.origins[i] as i64;
                let here = self.site(x + self.offset);
                self.accum[i] += self.fixed[here] - self.base[i];
                if step > 0 {
                    // bond moves from {x+k, x+k+1} to {x+k+1, x+k+2}
                    self.accum[i] -= occ(self.site(x + self.offset + 1)) as i64;
                } else {
                    // bond moves from {x+k, x+k+1} to {x+k−1, x+k}
                    self.accum[i] += occ(self.site(x + self.offset)) as i64;
                }
                let next = self.site(x + self.offset + step);
                if !self.tracked[next] {
                    self.error = Some((self.offset + step, next));
                }
                self.base[i] = self.fixed[next];
            }
            self.offset += step;
            if self.offset.unsigned_abs() as usize >= self.len {
                self.error = Some((self.offset, usize::MAX));
                return;
            }
        }
    }

    /// Bring the frame up to time `t`; `config` must be the state at `t`.
    pub fn sync(&mut self, t: f64, config: &Configuration) {
        let occ = config.as_slice();
        self.advance(t, |x| occ[x]);
    }

    /// Signed count through bond {x, x+1} since t = 0.
    pub fn current_fixed(&self, x: usize) -> Result<i64> {
        let x = x % self.len;
        if !self.tracked[x] {
            return Err(Error::UntrackedBond(x));
        }
        Ok(self.fixed[x])
    }

    /// Net flux through moving bond `index` up to the time of the last `sync`.
    pub fn current_moving(&self, index: usize) -> Result<i64> {
        if let Some((sites, bond)) = self.error {
            return Err(if bond == usize::MAX {
                Error::FrameWrapped {
                    sites,
                    len: self.len,
                }
            } else {
                Error::UntrackedBond(bond)
            });
        }
        let x = self.origins[index] as i64;
        let here = self.site(x + self.offset);
        Ok(self.accum[index] + self.fixed[here] - self.base[index])
    }

    pub fn frame_offset(&self) -> i64 {
        self.offset
    }

    /// All fixed-bond counts (untracked bonds read 0).
    pub fn fixed_counts(&self) -> &[i64] {
        &self.fixed
    }
}

impl JumpObserver for CurrentTally {
    #[inline]
    fn on_jump(&mut self, event: &JumpEvent, config: &Configuration) {
        if !self.origins.is_empty() && self.frame.lattice_offset(event.time) != self.offset {
            // occupations just before the swap
            let occ = config.as_slice();
            let b = event.bond;
            let b1 = if b + 1 == self.len { 0 } else { b + 1 };
            self.advance(event.time, |x| {
                if x == b {
                    occ[b1]
                } else if x == b1 {
                    occ[b]
                } else {
                    occ[x]
                }
            });
        }
        if self.tracked[event.bond] {
            self.fixed[event.bond] += event.direction.sign();
        }
    }
}

/// J_mov = J_x(t) − Σ_{y=x+1}^{x+k} η_t(y) for k ≥ 0 (and + Σ_{y=x+k+1}^{x} η_t(y) for k < 0).
pub fn moving_current_closed_form(fixed_x: i64, x: usize, k: i64, config: &Configuration) -> i64 {
    let mut q = fixed_x;
    if k >= 0 {
        for y in 1..=k {
            q -= config.at(x as isize + y as isize) as i64;
        }
    } else {
        for y in (k + 1)..=0 {
            q += config.at(x as isize + y as isize) as i64;
        }
    }
    q
}
