use crate::lattice::{Configuration, RateModel};

const INACTIVE: u8 = u8::MAX;

/// Bond rates grouped into classes of equal value.
///
/// A bond is active in at most one direction (η(x) ≠ η(x+1)), and its rate is
/// n²·c·p_n or n²·c·q_n, so the number of distinct rates is at most twice the
/// number of distinct c values. Each class keeps its members in a dense array
/// with O(1) insert/remove; sampling scans the classes and picks a member
/// uniformly. Both operations are O(#classes), independent of the torus size,
/// and the total rate is recomputed from integer counts so it never drifts.
#[derive(Debug, Clone)]
pub(crate) struct RateTable {
    offset: isize,
    width: usize,
    class_of_pattern: Vec<u8>,
    class_rate: Vec<f64>,
    class_forward: Vec<bool>,
    members: Vec<Vec<u32>>,
    class_of: Vec<u8>,
    pos: Vec<u32>,
}

impl RateTable {
    pub fn new(model: &RateModel, speed: f64, p: f64, q: f64, config: &Configuration) -> Self {
        let c = model.local();
        let b0 = (-c.offset) as usize;
        let mut distinct: Vec<f64> = Vec::new();
        for &v in &c.values {
            if !distinct.contains(&v) {
                distinct.push(v);
            }
        }
        assert!(distinct.len() * 2 < INACTIVE as usize, "too many distinct rates");
        let mut class_rate = Vec::new();
        let mut class_forward = Vec::new();
        for &v in &distinct {
            class_rate.push(speed * v * p);
            class_forward.push(true);
            class_rate.push(speed * v * q);
            class_forward.push(false);
        }
        let class_of_pattern = c
            .values
            .iter()
            .enumerate()
            .map(|(bits, v)| {
                let id = distinct.iter().position(|d| d == v).unwrap() as u8;
                match ((bits >> b0) & 1, (bits >> (b0 + 1)) & 1) {
                    (1, 0) => 2 * id,
                    (0, 1) => 2 * id + 1,
                    _ => INACTIVE,
                }
            })
            .collect();
        let len = config.len();
        let mut table = RateTable {
            offset: c.offset,
            width: c.width,
            class_of_pattern,
            members: vec![Vec::new(); class_rate.len()],
            class_rate,
            class_forward,
            class_of: vec![INACTIVE; len],
            pos: vec![0; len],
        };
        table.rebuild(config);
        table
    }

    pub fn rebuild(&mut self, config: &Configuration) {
        for m in &mut self.members {
            m.clear();
        }
        self.class_of.fill(INACTIVE);
        for b in 0..config.len() {
            self.refresh(config, b);
        }
    }

    #[inline]
    fn pattern_class(&self, config: &Configuration, bond: usize) -> u8 {
        let bits = config.pattern(bond as isize, self.offset, self.width);
        self.class_of_pattern[bits]
    }

    /// Recompute the class of `bond` from the configuration.
    #[inline]
    pub fn refresh(&mut self, config: &Configuration, bond: usize) {
        let new = self.pattern_class(config, bond);
        let old = self.class_of[bond];
        if new == old {
            return;
        }
        if old != INACTIVE {
            let list = &mut self.members[old as usize];
            let i = self.pos[bond] as usize;
            let last = *list.last().unwrap();
            list.swap_remove(i);
            if last as usize != bond {
                self.pos[last as usize] = i as u32;
            }
        }
        if new != INACTIVE {
            let list = &mut self.members[new as usize];
            self.pos[bond] = list.len() as u32;
            list.push(bond as u32);
        }
        self.class_of[bond] = new;
    }

    /// Refresh every bond whose rate window contains site `x` or `x+1`.
    #[inline]
    pub fn refresh_around(&mut self, config: &Configuration, x: usize) {
        let len = config.len() as isize;
        // window of bond b is [b + offset, b + offset + width)
        let lo = x as isize - self.offset - self.width as isize + 1;
        let hi = x as isize + 1 - self.offset;
        for b in lo..=hi {
            self.refresh(config, b.rem_euclid(len) as usize);
        }
    }

    #[inline]
    pub fn total(&self) -> f64 {
        self.members
            .iter()
            .zip(&self.class_rate)
            .map(|(m, r)| m.len() as f64 * r)
            .sum()
    }

    /// Pick a bond with probability proportional to its rate, given u ~ U[0,1).
    #[inline]
    pub fn pick(&self, u: f64, total: f64) -> (usize, bool) {
        let mut rem = u * total;
        let mut last = None;
        for (k, (members, &rate)) in self.members.iter().zip(&self.class_rate).enumerate() {
            if members.is_empty() || rate == 0.0 {
                continue;
            }
            let weight = members.len() as f64 * rate;
            if rem < weight {
                let i = ((rem / rate) as usize).min(members.len() - 1);
                return (members[i] as usize, self.class_forward[k]);
            }
            rem -= weight;
            last = Some(k);
        }
        // rounding pushed u*total past the last boundary
        let k = last.expect("pick called with zero total rate");
        (*self.members[k].last().unwrap() as usize, self.class_forward[k])
    }

    /// (forward, backward) rate of `bond` as stored.
    pub fn bond_rate(&self, bond: usize) -> (f64, f64) {
        match self.class_of[bond] {
            INACTIVE => (0.0, 0.0),
            k => {
                let r = self.class_rate[k as usize];
                if self.class_forward[k as usize] {
                    (r, 0.0)
                } else {
                    (0.0, r)
                }
            }
        }
    }

    pub fn class_count(&self) -> usize {
        self.class_rate.len()
    }
}
