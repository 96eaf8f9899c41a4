//! Closed-form first-hitting responses of a fully absorbing sphere.
//!
//! Every model here is a signed sum of first-passage kernels: a weight `w`
//! and an effective path length `L` contribute
//!
//! ```text
//! rate:  w / sqrt(4 pi D t) * (L / t) * exp(-L^2 / (4 D t))
//! cdf:   w * erfc(L / sqrt(4 D t))
//! ```
//!
//! so the cumulative form is the exact time integral of the rate. A single
//! receiver contributes one positive term. A pair of receivers adds, for
//! each receiver, one negative "stealing" term for molecules that reach the
//! competitor first. The half-space model is the receiver/mirror-image pair
//! and the two-plane model sums over a truncated image lattice.

use crate::error::{Error, Result};
use crate::geometry::{
    angular_separation, generate_images_two_planes, mirror_sphere, AbsorbingSphere, ImageSet,
    Plane, Vec3,
};
use crate::real::Real;

/// Diffusion coefficient in um^2/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diffusion<T>(T);

impl<T: Real> Diffusion<T> {
    pub fn new(d: T) -> Result<Self> {
        if d > T::zero() && d.is_finite() {
            Ok(Self(d))
        } else {
            Err(Error::InvalidParameter(format!(
                "diffusion coefficient must be finite and > 0, got {d}"
            )))
        }
    }

    #[inline]
    pub fn get(self) -> T {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Term<T> {
    weight: T,
    path: T,
}

/// Signed sum of first-passage kernels sharing one diffusion coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseSeries<T> {
    terms: Vec<Term<T>>,
    diffusion: Diffusion<T>,
}

impl<T: Real> ResponseSeries<T> {
    fn new(diffusion: Diffusion<T>) -> Self {
        Self {
            terms: Vec::new(),
            diffusion,
        }
    }

    fn push(&mut self, weight: T, path: T) {
        self.terms.push(Term { weight, path });
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Hitting rate (1/s) without clamping; zero for `t <= 0`.
    pub fn rate(&self, t: T) -> T {
        if !(t > T::zero()) {
            return T::zero();
        }
        let four_dt = T::lit(4.0) * self.diffusion.get() * t;
        let prefactor = T::one() / (T::PI() * four_dt).sqrt() / t;
        self.terms.iter().fold(T::zero(), |acc, term| {
            acc + term.weight * prefactor * term.path * (-(term.path * term.path) / four_dt).exp()
        })
    }

    /// Cumulative hitting probability without clamping; zero for `t <= 0`.
    pub fn cdf(&self, t: T) -> T {
        if !(t > T::zero()) {
            return T::zero();
        }
        let scale = T::one() / (T::lit(4.0) * self.diffusion.get() * t).sqrt();
        self.terms.iter().fold(T::zero(), |acc, term| {
            acc + term.weight * (term.path * scale).erfc()
        })
    }
}

fn check_time<T: Real>(t: T) -> Result<()> {
    if t >= T::zero() {
        Ok(())
    } else {
        Err(Error::NonPositiveTime(t.as_f64()))
    }
}

#[inline]
fn clamp_probability<T: Real>(p: T) -> T {
    p.max(T::zero()).min(T::one())
}

/// Single receiver in unbounded space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SisoParams<T> {
    r0: T,
    r_r: T,
    diffusion: Diffusion<T>,
}

impl<T: Real> SisoParams<T> {
    /// `r0` is the transmitter to receiver-center distance, `r_r` the
    /// receiver radius.
    pub fn new(r0: T, r_r: T, diffusion: Diffusion<T>) -> Result<Self> {
        if !(r_r > T::zero() && r_r.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "receiver radius r_r must be > 0, got {r_r}"
            )));
        }
        if !(r0 > r_r && r0.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "r0 > r_r violated: r0 = {r0}, r_r = {r_r}"
            )));
        }
        Ok(Self { r0, r_r, diffusion })
    }

    pub fn r0(&self) -> T {
        self.r0
    }

    pub fn r_r(&self) -> T {
        self.r_r
    }

    pub fn diffusion(&self) -> Diffusion<T> {
        self.diffusion
    }

    pub fn series(&self) -> ResponseSeries<T> {
        let mut s = ResponseSeries::new(self.diffusion);
        s.push(self.r_r / self.r0, self.r0 - self.r_r);
        s
    }
}

pub fn siso_hit_rate<T: Real>(t: T, p: &SisoParams<T>) -> Result<T> {
    check_time(t)?;
    Ok(p.series().rate(t))
}

pub fn siso_hit_cdf<T: Real>(t: T, p: &SisoParams<T>) -> T {
    p.series().cdf(t)
}

/// Distance from the shrunken source point toward the competing receiver
/// to the target receiver's center, by the law of cosines.
///
/// The source receiver is replaced by a point at `r0_source - r_source^2 /
/// r0_source` from the transmitter along its direction.
pub fn effective_distance<T: Real>(r0_source: T, r_source: T, r0_target: T, phi: T) -> T {
    let shrunk = r0_source - r_source * (r_source / r0_source);
    let sq = shrunk * shrunk + r0_target * r0_target - T::lit(2.0) * shrunk * r0_target * phi.cos();
    sq.max(T::zero()).sqrt()
}

/// Receiver `i` competing with receiver `j` for the same molecules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimoPairParams<T> {
    pub r_i: T,
    pub r_j: T,
    pub r0_i: T,
    pub r0_j: T,
    pub phi: T,
}

impl<T: Real> SimoPairParams<T> {
    pub fn new(r_i: T, r_j: T, r0_i: T, r0_j: T, phi: T) -> Result<Self> {
        if !(r_i > T::zero() && r_j >= T::zero()) {
            return Err(Error::InvalidParameter(
                "receiver radii must be positive".into(),
            ));
        }
        if !(r0_i > r_i && r0_j > r_j) {
            return Err(Error::InvalidParameter(format!(
                "transmitter must lie outside both receivers: r0_i = {r0_i}, r_i = {r_i}, r0_j = {r0_j}, r_j = {r_j}"
            )));
        }
        if !(phi >= T::zero() && phi <= T::PI()) {
            return Err(Error::InvalidParameter(format!(
                "angular separation must be in [0, pi], got {phi}"
            )));
        }
        Ok(Self {
            r_i,
            r_j,
            r0_i,
            r0_j,
            phi,
        })
    }

    pub fn from_geometry(
        tx: Vec3<T>,
        rx_i: &AbsorbingSphere<T>,
        rx_j: &AbsorbingSphere<T>,
    ) -> Result<Self> {
        let phi = angular_separation(tx, rx_i.center(), rx_j.center())?;
        Self::new(
            rx_i.radius(),
            rx_j.radius(),
            tx.distance(rx_i.center()),
            tx.distance(rx_j.center()),
            phi,
        )
    }

    /// Same pair seen from receiver `j`.
    pub fn swapped(&self) -> Self {
        Self {
            r_i: self.r_j,
            r_j: self.r_i,
            r0_i: self.r0_j,
            r0_j: self.r0_i,
            phi: self.phi,
        }
    }

    /// `r0_{i|j}`: from the competitor `j` to receiver `i`.
    pub fn r0_i_given_j(&self) -> T {
        effective_distance(self.r0_j, self.r_j, self.r0_i, self.phi)
    }

    fn push_terms(&self, series: &mut ResponseSeries<T>) {
        series.push(self.r_i / self.r0_i, self.r0_i - self.r_i);
        if self.r_j > T::zero() {
            let r0_ij = self.r0_i_given_j();
            series.push(
                -(self.r_j * self.r_i) / (self.r0_j * r0_ij),
                (self.r0_j + r0_ij) - (self.r_j + self.r_i),
            );
        }
    }

    pub fn series(&self, diffusion: Diffusion<T>) -> ResponseSeries<T> {
        let mut s = ResponseSeries::new(diffusion);
        self.push_terms(&mut s);
        s
    }
}

/// Hitting rate toward receiver `i`, without clamping.
pub fn simo_hit_rate<T: Real>(t: T, p: &SimoPairParams<T>, diffusion: Diffusion<T>) -> Result<T> {
    check_time(t)?;
    Ok(p.series(diffusion).rate(t))
}

pub fn simo_hit_rate_clamped<T: Real>(
    t: T,
    p: &SimoPairParams<T>,
    diffusion: Diffusion<T>,
) -> Result<T> {
    simo_hit_rate(t, p, diffusion).map(|r| r.max(T::zero()))
}

pub fn simo_hit_cdf_raw<T: Real>(t: T, p: &SimoPairParams<T>, diffusion: Diffusion<T>) -> T {
    p.series(diffusion).cdf(t)
}

/// Absorption probability of receiver `i` by time `t`, clamped to `[0, 1]`.
pub fn simo_hit_cdf<T: Real>(t: T, p: &SimoPairParams<T>, diffusion: Diffusion<T>) -> T {
    clamp_probability(simo_hit_cdf_raw(t, p, diffusion))
}

/// Receiver near one infinite reflecting plane.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpaceParams<T> {
    tx: Vec3<T>,
    rx: AbsorbingSphere<T>,
    plane: Plane<T>,
    diffusion: Diffusion<T>,
    image: AbsorbingSphere<T>,
    rx_pair: SimoPairParams<T>,
    series: ResponseSeries<T>,
}

impl<T: Real> HalfSpaceParams<T> {
    pub fn new(
        tx: Vec3<T>,
        rx: AbsorbingSphere<T>,
        plane: Plane<T>,
        diffusion: Diffusion<T>,
    ) -> Result<Self> {
        if !(plane.signed_distance(tx) >= T::zero()) {
            return Err(Error::InvalidParameter(
                "transmitter must not be behind the plane".into(),
            ));
        }
        if !(plane.signed_distance(rx.center()) > T::zero()) {
            return Err(Error::InvalidParameter(
                "receiver center must be strictly on the valid side of the plane".into(),
            ));
        }
        if !(tx.distance(rx.center()) > rx.radius()) {
            return Err(Error::InvalidParameter(
                "transmitter must lie outside the receiver".into(),
            ));
        }
        let image = mirror_sphere(&rx, &plane)?;
        let rx_pair = SimoPairParams::from_geometry(tx, &rx, &image)?;
        let mut series = ResponseSeries::new(diffusion);
        rx_pair.push_terms(&mut series);
        rx_pair.swapped().push_terms(&mut series);
        Ok(Self {
            tx,
            rx,
            plane,
            diffusion,
            image,
            rx_pair,
            series,
        })
    }

    pub fn tx(&self) -> Vec3<T> {
        self.tx
    }
    pub fn rx(&self) -> &AbsorbingSphere<T> {
        &self.rx
    }
    pub fn plane(&self) -> &Plane<T> {
        &self.plane
    }
    pub fn diffusion(&self) -> Diffusion<T> {
        self.diffusion
    }
    /// Mirror image of the receiver.
    pub fn image(&self) -> &AbsorbingSphere<T> {
        &self.image
    }
    /// The receiver competing with its image; `swapped()` gives the image's
    /// view.
    pub fn rx_pair(&self) -> &SimoPairParams<T> {
        &self.rx_pair
    }
    pub fn series(&self) -> &ResponseSeries<T> {
        &self.series
    }
}

/// Hitting rate of the receiver in the half-space, without clamping.
pub fn halfspace_hit_rate<T: Real>(t: T, p: &HalfSpaceParams<T>) -> Result<T> {
    check_time(t)?;
    Ok(p.series.rate(t))
}

/// Absorption probability by time `t` in the half-space: the pairwise
/// response of the receiver plus that of its mirror image, clamped to
/// `[0, 1]`.
pub fn halfspace_hit_cdf<T: Real>(t: T, p: &HalfSpaceParams<T>) -> T {
    clamp_probability(p.series.cdf(t))
}

/// Receiver between two parallel reflecting planes.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPlaneParams<T> {
    tx: Vec3<T>,
    rx: AbsorbingSphere<T>,
    p1: Plane<T>,
    p2: Plane<T>,
    k: usize,
    diffusion: Diffusion<T>,
    images: ImageSet<T>,
    series: ResponseSeries<T>,
}

impl<T: Real> TwoPlaneParams<T> {
    /// `k` is the number of image receivers kept besides the real one.
    pub fn new(
        tx: Vec3<T>,
        rx: AbsorbingSphere<T>,
        p1: Plane<T>,
        p2: Plane<T>,
        k: usize,
        diffusion: Diffusion<T>,
    ) -> Result<Self> {
        for plane in [&p1, &p2] {
            if !(plane.signed_distance(tx) >= T::zero()) {
                return Err(Error::InvalidParameter(
                    "transmitter must lie between the planes".into(),
                ));
            }
        }
        if !(tx.distance(rx.center()) > rx.radius()) {
            return Err(Error::InvalidParameter(
                "transmitter must lie outside the receiver".into(),
            ));
        }
        let images = generate_images_two_planes(tx, &rx, &p1, &p2, k)?;
        let r_r = rx.radius();
        let mut series = ResponseSeries::new(diffusion);
        let n = images.spheres.len();
        for i in 0..n {
            let r_im_i = images.distances_from_tx[i];
            series.push(r_r / r_im_i, r_im_i - r_r);
            for j in (0..n).filter(|&j| j != i) {
                let r_im_j = images.distances_from_tx[j];
                let phi =
                    angular_separation(tx, images.spheres[i].center(), images.spheres[j].center())?;
                let r0_ij = effective_distance(r_im_j, r_r, r_im_i, phi);
                series.push(
                    -(r_r * r_r) / (r_im_j * r0_ij),
                    (r_im_j + r0_ij) - (r_r + r_r),
                );
            }
        }
        Ok(Self {
            tx,
            rx,
            p1,
            p2,
            k,
            diffusion,
            images,
            series,
        })
    }

    pub fn tx(&self) -> Vec3<T> {
        self.tx
    }
    pub fn rx(&self) -> &AbsorbingSphere<T> {
        &self.rx
    }
    pub fn planes(&self) -> (&Plane<T>, &Plane<T>) {
        (&self.p1, &self.p2)
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn diffusion(&self) -> Diffusion<T> {
        self.diffusion
    }
    pub fn images(&self) -> &ImageSet<T> {
        &self.images
    }
    pub fn series(&self) -> &ResponseSeries<T> {
        &self.series
    }

    /// Same configuration truncated to `k` images.
    pub fn with_k(&self, k: usize) -> Result<Self> {
        Self::new(self.tx, self.rx, self.p1, self.p2, k, self.diffusion)
    }
}

/// Truncated image-lattice hitting rate, without clamping.
pub fn two_plane_hit_rate<T: Real>(t: T, p: &TwoPlaneParams<T>) -> Result<T> {
    check_time(t)?;
    Ok(p.series.rate(t))
}

/// Truncated image-lattice absorption probability, clamped to `[0, 1]`.
pub fn two_plane_hit_cdf_approx<T: Real>(t: T, p: &TwoPlaneParams<T>) -> T {
    clamp_probability(p.series.cdf(t))
}

/// One closed-form response, as matched to a simulated environment.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelModel<T> {
    Siso(SisoParams<T>),
    HalfSpace(HalfSpaceParams<T>),
    TwoPlane(TwoPlaneParams<T>),
}

impl<T: Real> ChannelModel<T> {
    pub fn name(&self) -> &'static str {
        match self {
            ChannelModel::Siso(_) => "siso",
            ChannelModel::HalfSpace(_) => "halfspace",
            ChannelModel::TwoPlane(_) => "twoplane",
        }
    }

    pub fn series(&self) -> ResponseSeries<T> {
        match self {
            ChannelModel::Siso(p) => p.series(),
            ChannelModel::HalfSpace(p) => p.series.clone(),
            ChannelModel::TwoPlane(p) => p.series.clone(),
        }
    }

    pub fn rate_raw(&self, t: T) -> T {
        match self {
            ChannelModel::Siso(p) => p.series().rate(t),
            ChannelModel::HalfSpace(p) => p.series.rate(t),
            ChannelModel::TwoPlane(p) => p.series.rate(t),
        }
    }

    /// Hitting rate clamped to be non-negative.
    pub fn rate(&self, t: T) -> T {
        self.rate_raw(t).max(T::zero())
    }

    pub fn cdf_raw(&self, t: T) -> T {
        match self {
            ChannelModel::Siso(p) => p.series().cdf(t),
            ChannelModel::HalfSpace(p) => p.series.cdf(t),
            ChannelModel::TwoPlane(p) => p.series.cdf(t),
        }
    }

    /// Cumulative absorption probability clamped to `[0, 1]`.
    pub fn cdf(&self, t: T) -> T {
        clamp_probability(self.cdf_raw(t))
    }
}

#[cfg(test)]
#[allow(clippy::excessive_precision)] // frozen oracle values keep every digit
mod tests {
    use super::*;
    use crate::geometry::Vec3;

    const D: f64 = 79.4;

    fn diff() -> Diffusion<f64> {
        Diffusion::new(D).unwrap()
    }

    fn v(x: f64, y: f64, z: f64) -> Vec3<f64> {
        Vec3::new(x, y, z)
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn erfc_matches_high_precision_values() {
        // 50-digit reference values.
        let cases = [
            (0.1, 0.887_537_083_981_715_107_8),
            (0.5, 0.479_500_122_186_953_462_32),
            (1.0, 0.157_299_207_050_285_130_66),
            (2.5, 4.069_520_174_449_589_395_6e-4),
            (5.0, 1.537_459_794_428_034_850_2e-12),
            (10.0, 2.088_487_583_762_544_757e-45),
            (20.0, 5.395_865_611_607_900_928_9e-176),
            (26.0, 5.663_192_408_856_142_846_5e-296),
        ];
        for (x, expected) in cases {
            let got = <f64 as Real>::erfc(x);
            assert!(
                rel_err(got, expected) <= 1e-13,
                "erfc({x}) = {got}, want {expected}"
            );
        }
        assert_eq!(<f64 as Real>::erfc(0.0), 1.0);
        assert!((<f64 as Real>::erfc(-1.0) - (2.0 - 0.157_299_207_050_285_130_66)).abs() < 1e-15);
    }

    #[test]
    fn siso_rate_matches_high_precision_value() {
        let p = SisoParams::new(10.0, 5.0, diff()).unwrap();
        let got = siso_hit_rate(0.01, &p).unwrap();
        assert!(rel_err(got, 0.030_189_780_053_941_823_243) < 1e-12, "{got}");
    }

    #[test]
    fn siso_rate_edge_cases() {
        let p = SisoParams::new(10.0, 5.0, diff()).unwrap();
        assert_eq!(siso_hit_rate(0.0, &p).unwrap(), 0.0);
        assert!(siso_hit_rate(1e-6, &p).unwrap() < 1e-300);
        assert!(matches!(
            siso_hit_rate(-1.0, &p),
            Err(Error::NonPositiveTime(_))
        ));
        let far = SisoParams::new(15.0, 5.0, diff()).unwrap();
        let t = 0.01;
        assert!(siso_hit_rate(t, &far).unwrap() < siso_hit_rate(t, &p).unwrap());
    }

    #[test]
    fn siso_cdf_limits() {
        let p = SisoParams::new(10.0, 5.0, diff()).unwrap();
        assert_eq!(siso_hit_cdf(0.0, &p), 0.0);
        assert!((siso_hit_cdf(1e20, &p) - 0.5).abs() < 1e-9);
        let t0 = SisoParams::new(10.0 * 2f64.sqrt(), 5.0, diff()).unwrap();
        assert!(rel_err(siso_hit_cdf(2.0, &t0), 0.214_946_158_101_822_536_28) < 1e-12);
    }

    #[test]
    fn siso_params_reject_receiver_enclosing_transmitter() {
        let err = SisoParams::new(5.0, 5.0, diff()).unwrap_err();
        assert!(err.to_string().contains("r0 > r_r"));
        assert!(Diffusion::new(0.0).is_err());
    }

    #[test]
    fn effective_distance_examples() {
        let half_pi = std::f64::consts::FRAC_PI_2;
        let got = effective_distance(14.0, 5.0, 9.0, half_pi);
        let shrunk: f64 = 14.0 - 25.0 / 14.0;
        assert!((got - (shrunk * shrunk + 81.0).sqrt()).abs() < 1e-12);

        let phi = 0.7f64;
        let point = effective_distance(12.0, 0.0, 9.0, phi);
        assert!((point - (144.0f64 + 81.0 - 2.0 * 12.0 * 9.0 * phi.cos()).sqrt()).abs() < 1e-12);

        let t2 = effective_distance(22.0f64, 5.0, 10.0, 0.0);
        assert!((t2 - 10.863_636_363_636_363_636).abs() < 1e-12);
    }

    #[test]
    fn simo_reduces_to_siso_without_competitor() {
        let p = SimoPairParams::new(5.0, 0.0, 10.0, 12.0, 1.0).unwrap();
        let siso = SisoParams::new(10.0, 5.0, diff()).unwrap();
        for t in [0.01, 0.1, 0.5, 2.0] {
            assert_eq!(
                simo_hit_rate(t, &p, diff()).unwrap(),
                siso_hit_rate(t, &siso).unwrap()
            );
            assert_eq!(simo_hit_cdf(t, &p, diff()), siso_hit_cdf(t, &siso));
        }
        // Stealing term scales with the competitor radius.
        let tiny = SimoPairParams::new(5.0, 1e-9, 10.0, 12.0, 1.0).unwrap();
        let gap = siso_hit_cdf(2.0, &siso) - simo_hit_cdf(2.0, &tiny, diff());
        assert!(gap > 0.0 && gap < 1e-9, "{gap}");
    }

    #[test]
    fn simo_symmetric_pair_gives_equal_rates() {
        let p = SimoPairParams::new(4.0, 4.0, 11.0, 11.0, 1.2).unwrap();
        for t in [0.005, 0.05, 0.3, 1.7] {
            assert_eq!(
                simo_hit_rate(t, &p, diff()).unwrap(),
                simo_hit_rate(t, &p.swapped(), diff()).unwrap()
            );
        }
    }

    #[test]
    fn simo_topology0_matches_high_precision_value() {
        let tx = v(0.0, 0.0, 10.0);
        let rx = AbsorbingSphere::new(v(10.0, 0.0, 0.0), 5.0).unwrap();
        let im = AbsorbingSphere::new(v(-10.0, 0.0, 0.0), 5.0).unwrap();
        let p = SimoPairParams::from_geometry(tx, &rx, &im).unwrap();
        let rate = simo_hit_rate(0.05, &p, diff()).unwrap();
        assert!(
            rel_err(rate, 0.047_400_219_045_778_290_116) < 1e-12,
            "{rate}"
        );
        let cdf = simo_hit_cdf(2.0, &p, diff());
        assert!(rel_err(cdf, 0.196_306_777_978_181_260_59) < 1e-12, "{cdf}");
        assert_eq!(simo_hit_cdf(0.0, &p, diff()), 0.0);
    }

    #[test]
    fn halfspace_total_eclipse_value() {
        let rx = AbsorbingSphere::new(v(10.0, 0.0, 0.0), 5.0).unwrap();
        let p = HalfSpaceParams::new(v(20.0, 0.0, 0.0), rx, Plane::x_equals(4.0), diff()).unwrap();
        assert_eq!(p.image().center(), v(-2.0, 0.0, 0.0));
        let got = halfspace_hit_cdf(2.0, &p);
        assert!(rel_err(got, 0.374_255_691_574_655_660_28) < 1e-12, "{got}");
    }

    #[test]
    fn halfspace_far_plane_approaches_siso() {
        let rx = AbsorbingSphere::new(v(10.0, 0.0, 0.0), 5.0).unwrap();
        let tx = v(20.0, 0.0, 0.0);
        let siso = SisoParams::new(10.0, 5.0, diff()).unwrap();
        let p = HalfSpaceParams::new(tx, rx, Plane::x_equals(-1e4), diff()).unwrap();
        for t in [0.01, 0.5, 1.0, 2.0] {
            assert!((halfspace_hit_cdf(t, &p) - siso_hit_cdf(t, &siso)).abs() < 1e-6);
        }
    }

    #[test]
    fn halfspace_symmetric_summands() {
        // Topology 0 with the transmitter on the mirror plane.
        let rx = AbsorbingSphere::new(v(10.0, 0.0, 0.0), 5.0).unwrap();
        let plane = Plane::x_equals(0.0);
        let tx = v(1e-300, 0.0, 10.0);
        let p = HalfSpaceParams::new(tx, rx, plane, diff()).unwrap();
        let pair = p.rx_pair();
        for t in [0.02, 0.2, 2.0] {
            let a = simo_hit_cdf_raw(t, pair, diff());
            let b = simo_hit_cdf_raw(t, &pair.swapped(), diff());
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn halfspace_rejects_invalid_geometry() {
        let rx = AbsorbingSphere::new(v(10.0, 0.0, 0.0), 5.0).unwrap();
        assert!(HalfSpaceParams::new(v(-1.0, 0.0, 0.0), rx, Plane::x_equals(0.0), diff()).is_err());
        assert!(matches!(
            HalfSpaceParams::new(v(20.0, 0.0, 0.0), rx, Plane::x_equals(7.0), diff()),
            Err(Error::SphereIntersectsPlane { .. })
        ));
        assert!(HalfSpaceParams::new(v(11.0, 0.0, 0.0), rx, Plane::x_equals(0.0), diff()).is_err());
    }

    fn two_plane(k: usize, half_gap: f64) -> TwoPlaneParams<f64> {
        let rx = AbsorbingSphere::new(v(10.0, 0.0, 0.0), 5.0).unwrap();
        TwoPlaneParams::new(
            v(10.0, 0.0, 10.0),
            rx,
            Plane::x_equals(10.0 - half_gap),
            Plane::x_equals(10.0 + half_gap).flipped(),
            k,
            diff(),
        )
        .unwrap()
    }

    #[test]
    fn two_plane_without_images_is_siso() {
        let p = two_plane(0, 8.0);
        let siso = SisoParams::new(10.0, 5.0, diff()).unwrap();
        for t in [0.01, 0.3, 2.0] {
            assert_eq!(
                two_plane_hit_rate(t, &p).unwrap(),
                siso_hit_rate(t, &siso).unwrap()
            );
            assert_eq!(two_plane_hit_cdf_approx(t, &p), siso_hit_cdf(t, &siso));
        }
    }

    #[test]
    fn two_plane_far_planes_is_siso() {
        let p = two_plane(11, 1e6);
        let siso = SisoParams::new(10.0, 5.0, diff()).unwrap();
        for t in [0.01, 0.3, 2.0] {
            let diff_rate =
                (two_plane_hit_rate(t, &p).unwrap() - siso_hit_rate(t, &siso).unwrap()).abs();
            assert!(diff_rate < 1e-9, "{diff_rate}");
        }
    }

    #[test]
    fn two_plane_cdf_edges() {
        let p = two_plane(11, 8.0);
        assert_eq!(two_plane_hit_cdf_approx(0.0, &p), 0.0);
        let v = two_plane_hit_cdf_approx(2.0, &p);
        assert!((0.0..=1.0).contains(&v));
        assert!(matches!(
            two_plane_hit_rate(-0.1, &p),
            Err(Error::NonPositiveTime(_))
        ));
    }

    #[test]
    fn generic_over_f32() {
        let p = SisoParams::<f32>::new(10.0, 5.0, Diffusion::new(79.4f32).unwrap()).unwrap();
        let p64 = SisoParams::<f64>::new(10.0, 5.0, diff()).unwrap();
        let a = siso_hit_cdf(1.0f32, &p);
        let b = siso_hit_cdf(1.0f64, &p64);
        assert!((f64::from(a) - b).abs() < 1e-6);
    }

    #[test]
    fn channel_model_clamps() {
        let rx = AbsorbingSphere::new(v(10.0, 0.0, 0.0), 5.0).unwrap();
        let p = HalfSpaceParams::new(v(20.0, 0.0, 0.0), rx, Plane::x_equals(4.0), diff()).unwrap();
        let m = ChannelModel::HalfSpace(p);
        assert_eq!(m.name(), "halfspace");
        for t in [0.0, 0.001, 0.1, 1.0, 2.0] {
            assert!(m.rate(t) >= 0.0);
            assert!((0.0..=1.0).contains(&m.cdf(t)));
        }
        assert_eq!(m.series().len(), 4);
    }
}
