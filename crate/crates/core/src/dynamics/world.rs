use serde::{Deserialize, Serialize};

use super::{
    collide_disks, spring_force, Axis, AxisLine, BodyId, Disk, DynamicsError, GearDrive, Rotor,
    Spring, WallBox,
};
use crate::scalar::Real;
use crate::vec2::Vec2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ContactKind {
    Wall { disk: usize, axis: Axis },
    Partition { disk: usize },
    Disks { a: usize, b: usize },
    GearReversal,
}

/// Contact resolved during a step, with its interpolated time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Contact<T> {
    pub time: T,
    pub kind: ContactKind,
}

/// The simulated physical system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct World<T> {
    pub disks: Vec<Disk<T>>,
    pub rotors: Vec<Rotor<T>>,
    pub springs: Vec<Spring<T>>,
    pub wall_box: Option<WallBox<T>>,
    /// Impermeable dividing wall; each disk stays on the side it starts on.
    pub partition: Option<AxisLine<T>>,
    pub gear: Option<GearDrive<T>>,
    pub time: T,
    /// Viscous drag coefficient (force per unit velocity). Zero by default.
    pub drag: T,
}

impl<T: Real> Default for World<T> {
    fn default() -> Self {
        Self {
            disks: Vec::new(),
            rotors: Vec::new(),
            springs: Vec::new(),
            wall_box: None,
            partition: None,
            gear: None,
            time: T::zero(),
            drag: T::zero(),
        }
    }
}

#[derive(Clone, Copy)]
struct Bounds<T> {
    x: (T, T),
    y: (T, T),
}

impl<T: Real> Bounds<T> {
    fn axis(&self, axis: Axis) -> (T, T) {
        match axis {
            Axis::X => self.x,
            Axis::Y => self.y,
        }
    }
}

impl<T: Real> World<T> {
    /// Checks structural invariants: positive masses, disks inside the box,
    /// strictly on one side of the partition, and not overlapping.
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let bad = |msg: String| Err(DynamicsError::InvalidArgument(msg));
        for (i, d) in self.disks.iter().enumerate() {
            if !(d.mass > T::zero()) {
                return bad(format!("disk {i}: mass must be > 0"));
            }
            if !(d.radius >= T::zero()) {
                return bad(format!("disk {i}: radius must be >= 0"));
            }
            if !d.pos.is_finite() || !d.vel.is_finite() {
                return bad(format!("disk {i}: non-finite initial state"));
            }
            if let Some(b) = &self.wall_box {
                if !b.contains(d.pos) {
                    return bad(format!("disk {i}: initial position outside the box"));
                }
            }
            if let Some(p) = &self.partition {
                if p.signed_distance(d.pos) == T::zero() {
                    return bad(format!("disk {i}: initial position on the partition wall"));
                }
            }
        }
        if let Some(b) = &self.wall_box {
            if !(b.side > T::zero()) {
                return bad("box side must be > 0".into());
            }
        }
        for i in 0..self.disks.len() {
            for j in i + 1..self.disks.len() {
                let (a, b) = (&self.disks[i], &self.disks[j]);
                if (a.pos - b.pos).norm() < a.radius + b.radius {
                    return bad(format!("disks {i} and {j} overlap initially"));
                }
            }
        }
        for (i, r) in self.rotors.iter().enumerate() {
            if !(r.moment_of_inertia > T::zero()) {
                return bad(format!("rotor {i}: moment of inertia must be > 0"));
            }
            if !(r.marker_radius > T::zero()) {
                return bad(format!("rotor {i}: marker radius must be > 0"));
            }
        }
        for (i, s) in self.springs.iter().enumerate() {
            if !(s.stiffness > T::zero()) {
                return bad(format!("spring {i}: stiffness must be > 0"));
            }
            if s.disk >= self.disks.len() {
                return bad(format!("spring {i}: attached to missing disk {}", s.disk));
            }
        }
        if let Some(g) = &self.gear {
            if !(g.speed > T::zero() && g.half_period > T::zero()) {
                return bad("gear speed and half period must be > 0".into());
            }
        }
        Ok(())
    }

    /// Kinetic energy of disks and rotors plus spring potential energy.
    pub fn total_energy(&self) -> T {
        let kinetic = self
            .disks
            .iter()
            .map(Disk::kinetic_energy)
            .chain(self.rotors.iter().map(Rotor::kinetic_energy))
            .fold(T::zero(), |a, b| a + b);
        let potential = self
            .springs
            .iter()
            .map(|s| {
                let stretch = (self.disks[s.disk].pos - s.anchor).norm() - s.rest_length;
                T::half() * s.stiffness * stretch * stretch
            })
            .fold(T::zero(), |a, b| a + b);
        kinetic + potential
    }

    /// Position of a force-carrying body.
    pub fn body_position(&self, id: BodyId) -> Option<Vec2<T>> {
        match id {
            BodyId::Disk(i) => self.disks.get(i).map(|d| d.pos),
            BodyId::Marker(i) => self.rotors.get(i).map(Rotor::marker),
        }
    }

    pub fn body_velocity(&self, id: BodyId) -> Option<Vec2<T>> {
        match id {
            BodyId::Disk(i) => self.disks.get(i).map(|d| d.vel),
            BodyId::Marker(i) => self.rotors.get(i).map(Rotor::marker_velocity),
        }
    }

    fn loads(&self, applied: &[(BodyId, Vec2<T>)]) -> (Vec<Vec2<T>>, Vec<T>) {
        let mut forces = vec![Vec2::zero(); self.disks.len()];
        let mut torques = vec![T::zero(); self.rotors.len()];
        for s in &self.springs {
            let d = &self.disks[s.disk];
            forces[s.disk] += spring_force(s.stiffness, s.rest_length, s.anchor, d.pos);
        }
        if self.drag != T::zero() {
            for (f, d) in forces.iter_mut().zip(&self.disks) {
                *f -= d.vel * self.drag;
            }
        }
        for &(id, f) in applied {
            match id {
                BodyId::Disk(i) => forces[i] += f,
                BodyId::Marker(i) => {
                    let r = &self.rotors[i];
                    torques[i] = torques[i] + (r.marker() - r.pivot).cross(f);
                }
            }
        }
        (forces, torques)
    }

    fn kick(&mut self, applied: &[(BodyId, Vec2<T>)], h: T) {
        let (forces, torques) = self.loads(applied);
        for (d, f) in self.disks.iter_mut().zip(forces) {
            d.vel += f * (h / d.mass);
        }
        for (r, tq) in self.rotors.iter_mut().zip(torques) {
            r.angular_velocity = r.angular_velocity + tq * h / r.moment_of_inertia;
        }
    }

    fn disk_bounds(&self, i: usize) -> Bounds<T> {
        let inf = T::infinity();
        let mut b = Bounds { x: (-inf, inf), y: (-inf, inf) };
        if let Some(wb) = &self.wall_box {
            b.x = wb.bounds(Axis::X);
            b.y = wb.bounds(Axis::Y);
        }
        if let Some(p) = &self.partition {
            let pos = self.disks[i].pos;
            let (lo, hi) = b.axis(p.axis);
            let side = if p.signed_distance(pos) < T::zero() {
                (lo, if p.offset < hi { p.offset } else { hi })
            } else {
                (if p.offset > lo { p.offset } else { lo }, hi)
            };
            match p.axis {
                Axis::X => b.x = side,
                Axis::Y => b.y = side,
            }
        }
        b
    }

    /// Advances the world by `dt` under the given external forces.
    ///
    /// Forces are held constant over the step. Returns the contacts resolved
    /// inside the step. Identical inputs give bitwise identical results.
    pub fn step(
        &mut self,
        dt: T,
        applied: &[(BodyId, Vec2<T>)],
    ) -> Result<Vec<Contact<T>>, DynamicsError> {
        if !(dt > T::zero()) || !dt.is_finite() {
            return Err(DynamicsError::InvalidArgument(format!("dt must be > 0, got {dt}")));
        }
        for &(id, f) in applied {
            if !f.is_finite() {
                return Err(DynamicsError::InvalidArgument(format!(
                    "non-finite applied force on {id:?}"
                )));
            }
            if self.body_position(id).is_none() {
                return Err(DynamicsError::InvalidArgument(format!("unknown body {id:?}")));
            }
        }

        let t0 = self.time;
        let half = dt * T::half();
        let mut contacts = Vec::new();
        let bounds: Vec<Bounds<T>> = (0..self.disks.len()).map(|i| self.disk_bounds(i)).collect();

        self.kick(applied, half);

        let partition = self.partition;
        for (i, (d, b)) in self.disks.iter_mut().zip(&bounds).enumerate() {
            for axis in [Axis::X, Axis::Y] {
                let (x, v) = match axis {
                    Axis::X => (d.pos.x, d.vel.x),
                    Axis::Y => (d.pos.y, d.vel.y),
                };
                let (lo, hi) = b.axis(axis);
                let (xn, vn, hits) = drift_axis(x, v, lo, hi, dt);
                match axis {
                    Axis::X => {
                        d.pos.x = xn;
                        d.vel.x = vn;
                    }
                    Axis::Y => {
                        d.pos.y = xn;
                        d.vel.y = vn;
                    }
                }
                for (frac, upper) in hits {
                    let wall = if upper { hi } else { lo };
                    let at_partition = partition
                        .is_some_and(|p| p.axis == axis && p.offset == wall);
                    let kind = if at_partition {
                        ContactKind::Partition { disk: i }
                    } else {
                        ContactKind::Wall { disk: i, axis }
                    };
                    contacts.push(Contact { time: t0 + frac, kind });
                }
            }
        }
        for r in self.rotors.iter_mut() {
            r.angle = r.angle + r.angular_velocity * dt;
        }
        if let Some(g) = self.gear.as_mut() {
            for s in g.advance(t0, dt) {
                contacts.push(Contact { time: s, kind: ContactKind::GearReversal });
            }
        }

        self.resolve_disk_contacts(t0, dt, &bounds, &mut contacts)?;

        self.kick(applied, half);
        self.time = t0 + dt;
        self.check_finite()?;
        Ok(contacts)
    }

    fn resolve_disk_contacts(
        &mut self,
        t0: T,
        dt: T,
        bounds: &[Bounds<T>],
        contacts: &mut Vec<Contact<T>>,
    ) -> Result<(), DynamicsError> {
        let n = self.disks.len();
        if n < 2 {
            return Ok(());
        }
        for _pass in 0..4 {
            let mut any = false;
            for i in 0..n {
                for j in i + 1..n {
                    if self.resolve_pair(i, j, t0, dt, bounds, contacts)? {
                        any = true;
                    }
                }
            }
            if !any {
                break;
            }
        }
        Ok(())
    }

    fn resolve_pair(
        &mut self,
        i: usize,
        j: usize,
        t0: T,
        dt: T,
        bounds: &[Bounds<T>],
        contacts: &mut Vec<Contact<T>>,
    ) -> Result<bool, DynamicsError> {
        let (a, b) = (&self.disks[i], &self.disks[j]);
        let reach = a.radius + b.radius;
        let d = b.pos - a.pos;
        if d.norm_squared() >= reach * reach {
            return Ok(false);
        }
        let u = b.vel - a.vel;
        let Some(n_now) = d.normalized() else {
            return Ok(false);
        };
        if u.dot(n_now) >= T::zero() {
            // already separating
            return Ok(false);
        }
        // Rewind by tau along the current velocities: |d - u tau| = reach.
        let uu = u.norm_squared();
        let du = d.dot(u);
        let c = d.norm_squared() - reach * reach;
        let disc = du * du - uu * c;
        let tau = if uu > T::zero() && disc >= T::zero() {
            let t = (du + disc.sqrt()) / uu;
            if t >= T::zero() && t <= dt {
                Some(t)
            } else {
                None
            }
        } else {
            None
        };
        let (ma, mb) = (a.mass, b.mass);
        match tau {
            Some(tau) => {
                let pa = a.pos - a.vel * tau;
                let pb = b.pos - b.vel * tau;
                let normal = (pb - pa).normalized().unwrap_or(n_now);
                let (va, vb) = collide_disks(ma, a.vel, mb, b.vel, normal)?;
                for (k, p, v) in [(i, pa, va), (j, pb, vb)] {
                    let mut q = p;
                    let mut w = v;
                    for axis in [Axis::X, Axis::Y] {
                        let (lo, hi) = bounds[k].axis(axis);
                        let (x, vx, _) = drift_axis(axis.component(q), axis.component(w), lo, hi, tau);
                        match axis {
                            Axis::X => {
                                q.x = x;
                                w.x = vx;
                            }
                            Axis::Y => {
                                q.y = x;
                                w.y = vx;
                            }
                        }
                    }
                    self.disks[k].pos = q;
                    self.disks[k].vel = w;
                }
                contacts.push(Contact { time: t0 + dt - tau, kind: ContactKind::Disks { a: i, b: j } });
            }
            None => {
                // Overlap that cannot be traced back inside the step: resolve
                // velocities in place and separate to touching distance.
                let (va, vb) = collide_disks(ma, a.vel, mb, b.vel, n_now)?;
                let depth = reach - d.norm();
                let total = ma + mb;
                let pa = a.pos - n_now * (depth * mb / total);
                let pb = b.pos + n_now * (depth * ma / total);
                self.disks[i].vel = va;
                self.disks[j].vel = vb;
                self.disks[i].pos = pa;
                self.disks[j].pos = pb;
                contacts.push(Contact { time: t0 + dt, kind: ContactKind::Disks { a: i, b: j } });
            }
        }
        Ok(true)
    }

    fn check_finite(&self) -> Result<(), DynamicsError> {
        let fail = |detail: String| {
            Err(DynamicsError::NonFinite { time: self.time.as_f64(), detail })
        };
        for (i, d) in self.disks.iter().enumerate() {
            if !d.pos.is_finite() || !d.vel.is_finite() {
                return fail(format!("disk {i} state {:?} {:?}", d.pos, d.vel));
            }
        }
        for (i, r) in self.rotors.iter().enumerate() {
            if !r.angle.is_finite() || !r.angular_velocity.is_finite() {
                return fail(format!("rotor {i} angle/rate"));
            }
        }
        if let Some(g) = &self.gear {
            if !g.x.is_finite() {
                return fail("gear element position".into());
            }
        }
        if !self.time.is_finite() {
            return fail("time".into());
        }
        Ok(())
    }
}

/// Drifts one coordinate by `v dt`, folding it back into `[lo, hi]`.
///
/// Each fold is a specular bounce at the interpolated crossing time. The
/// returned hits carry the time offset within the step and whether the upper
/// bound was hit.
fn drift_axis<T: Real>(x: T, v: T, lo: T, hi: T, dt: T) -> (T, T, Vec<(T, bool)>) {
    let mut xn = x + v * dt;
    let mut vn = v;
    let mut hits = Vec::new();
    if xn <= hi && xn >= lo {
        return (xn, vn, hits);
    }
    let mut origin = x;
    let mut elapsed = T::zero();
    for _ in 0..16 {
        if xn > hi {
            let t_hit = if vn != T::zero() { (hi - origin) / vn } else { T::zero() };
            elapsed = elapsed + t_hit;
            hits.push((elapsed, true));
            xn = hi - (xn - hi);
            origin = hi;
            vn = -vn;
        } else if xn < lo {
            let t_hit = if vn != T::zero() { (lo - origin) / vn } else { T::zero() };
            elapsed = elapsed + t_hit;
            hits.push((elapsed, false));
            xn = lo + (lo - xn);
            origin = lo;
            vn = -vn;
        } else {
            break;
        }
    }
    (xn, vn, hits)
}
