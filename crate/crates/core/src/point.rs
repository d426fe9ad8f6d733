//! Points of the configuration space in either chart.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::expr::DIM;
use crate::field::Chart;

/// A configuration: seven coordinates plus the chart they refer to.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub chart: Chart,
    pub coords: [f64; DIM],
}

impl Configuration {
    pub fn original(coords: [f64; DIM]) -> Self {
        Self {
            chart: Chart::Original,
            coords,
        }
    }

    pub fn adapted(coords: [f64; DIM]) -> Self {
        Self {
            chart: Chart::Adapted,
            coords,
        }
    }

    /// `q0 = (0, 0, π/2, 0, 1, 1, 1)`, the point the nilpotent approximation is built at.
    pub fn reference() -> Self {
        Self::original([0.0, 0.0, std::f64::consts::FRAC_PI_2, 0.0, 1.0, 1.0, 1.0])
    }

    /// Leg lengths `(ℓ1, ℓ2, ℓ3)`.
    pub fn legs(&self) -> [f64; 3] {
        match self.chart {
            Chart::Original => [self.coords[4], self.coords[5], self.coords[6]],
            Chart::Adapted => [self.coords[1], self.coords[2], self.coords[3]],
        }
    }

    /// Mechanically meaningful states have all legs strictly positive.
    pub fn is_valid(&self) -> bool {
        self.legs().iter().all(|&l| l > 0.0)
    }

    pub fn expect_chart(&self, chart: Chart) -> Result<()> {
        if self.chart != chart {
            return Err(Error::ChartMismatch {
                expected: chart,
                found: self.chart,
            });
        }
        Ok(())
    }
}

/// A point in the adapted chart `(x, ℓ1, ℓ2, ℓ3, y1, y2, y3)`.
///
/// Serialised as `{"chart": "adapted", "coords": [..7 numbers..]}`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AdaptedPoint(pub [f64; DIM]);

/// Elements of the nilpotent group are adapted points.
pub type GroupElement = AdaptedPoint;

impl AdaptedPoint {
    pub const ORIGIN: AdaptedPoint = AdaptedPoint([0.0; DIM]);

    pub fn x(&self) -> f64 {
        self.0[0]
    }

    pub fn as_configuration(&self) -> Configuration {
        Configuration::adapted(self.0)
    }
}

impl TryFrom<Configuration> for AdaptedPoint {
    type Error = Error;

    fn try_from(c: Configuration) -> Result<Self> {
        c.expect_chart(Chart::Adapted)?;
        Ok(AdaptedPoint(c.coords))
    }
}

impl Serialize for AdaptedPoint {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.as_configuration().serialize(s)
    }
}

impl<'de> Deserialize<'de> for AdaptedPoint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let c = Configuration::deserialize(d)?;
        AdaptedPoint::try_from(c).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validity_is_a_predicate() {
        let mut q = Configuration::reference();
        assert!(q.is_valid());
        q.coords[5] = -0.1;
        assert!(!q.is_valid());
    }

    #[test]
    fn adapted_point_json_carries_chart_tag() {
        let p = AdaptedPoint([1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(json, r#"{"chart":"adapted","coords":[1.0,2.0,3.0,4.0,5.0,6.0,7.0]}"#);
        let back: AdaptedPoint = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
        let wrong = r#"{"chart":"original","coords":[0,0,0,0,0,0,0]}"#;
        assert!(serde_json::from_str::<AdaptedPoint>(wrong).is_err());
    }
}
