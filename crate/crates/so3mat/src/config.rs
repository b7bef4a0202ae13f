use crate::error::{Error, Result};
use crate::so3::Rotation;

/// Finite set of 3D points, each tagged with a color from a palette of size `n_colors`.
#[derive(Clone, Debug, PartialEq)]
pub struct ColoredConfig {
    n_colors: usize,
    points: Vec<(usize, [f64; 3])>,
}

impl ColoredConfig {
    pub fn new(n_colors: usize, points: Vec<(usize, [f64; 3])>) -> Result<Self> {
        for (i, (c, r)) in points.iter().enumerate() {
            if *c >= n_colors {
                return Err(Error::UnknownColor {
                    color: *c,
                    palette: n_colors,
                });
            }
            if !r.iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "point {i} has a non-finite coordinate"
                )));
            }
        }
        Ok(Self { n_colors, points })
    }

    pub fn empty(n_colors: usize) -> Self {
        Self {
            n_colors,
            points: Vec::new(),
        }
    }

    /// All points in a single color.
    pub fn monochrome(points: &[[f64; 3]]) -> Self {
        Self {
            n_colors: 1,
            points: points.iter().map(|r| (0, *r)).collect(),
        }
    }

    pub fn n_colors(&self) -> usize {
        self.n_colors
    }

    pub fn points(&self) -> &[(usize, [f64; 3])] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn of_color(&self, color: usize) -> impl Iterator<Item = [f64; 3]> + '_ {
        self.points
            .iter()
            .filter(move |(c, _)| *c == color)
            .map(|(_, r)| *r)
    }

    pub fn check_color(&self, color: usize) -> Result<()> {
        if color >= self.n_colors {
            return Err(Error::UnknownColor {
                color,
                palette: self.n_colors,
            });
        }
        Ok(())
    }

    pub fn transformed(&self, g: &Rotation) -> Self {
        Self {
            n_colors: self.n_colors,
            points: self.points.iter().map(|(c, r)| (*c, g.apply(*r))).collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            n_colors: self.n_colors,
            points: self
                .points
                .iter()
                .map(|(c, r)| (*c, [r[0] * s, r[1] * s, r[2] * s]))
                .collect(),
        }
    }

    /// Each point repeated `times` times.
    pub fn duplicated(&self, times: usize) -> Self {
        let points = self
            .points
            .iter()
            .flat_map(|p| std::iter::repeat_n(*p, times))
            .collect();
        Self {
            n_colors: self.n_colors,
            points,
        }
    }

    pub fn with_point(&self, color: usize, r: [f64; 3]) -> Result<Self> {
        let mut points = self.points.clone();
        points.push((color, r));
        Self::new(self.n_colors.max(color + 1), points)
    }

    pub fn permuted(&self, order: &[usize]) -> Self {
        Self {
            n_colors: self.n_colors,
            points: order.iter().map(|&i| self.points[i]).collect(),
        }
    }

    pub fn with_palette(mut self, n_colors: usize) -> Result<Self> {
        if let Some(c) = self.points.iter().map(|p| p.0).max() {
            if c >= n_colors {
                return Err(Error::UnknownColor {
                    color: c,
                    palette: n_colors,
                });
            }
        }
        self.n_colors = n_colors;
        Ok(self)
    }

    pub fn set_position(&mut self, index: usize, r: [f64; 3]) {
        self.points[index].1 = r;
    }
}

/// Text form: a header "n_points n_colors", then one "color x y z" line per point.
/// Blank lines and lines starting with '#' are skipped.
pub fn parse_config_file(text: &str) -> Result<ColoredConfig> {
    let mut pool = parse_config_pool(text)?;
    match pool.len() {
        1 => Ok(pool.remove(0)),
        0 => Err(Error::Parse {
            line: 1,
            message: "missing header \"n_points n_colors\"".into(),
        }),
        n => Err(Error::Parse {
            line: 1,
            message: format!("expected one configuration, found {n}"),
        }),
    }
}

/// Several configurations in the single-file form, one after another.
pub fn parse_config_pool(text: &str) -> Result<Vec<ColoredConfig>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let mut out = Vec::new();
    while let Some((hl, header)) = lines.next() {
        let fields: Vec<&str> = header.split_whitespace().collect();
        let parse_count = |s: &str| {
            s.parse::<usize>().map_err(|_| Error::Parse {
                line: hl,
                message: format!("bad count {s:?} in header"),
            })
        };
        if fields.len() != 2 {
            return Err(Error::Parse {
                line: hl,
                message: "header must be \"n_points n_colors\"".into(),
            });
        }
        let (n, colors) = (parse_count(fields[0])?, parse_count(fields[1])?);
        let mut points = Vec::with_capacity(n);
        for k in 0..n {
            let (ln, line) = lines.next().ok_or(Error::Parse {
                line: hl,
                message: format!("header announces {n} points, found {k}"),
            })?;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 {
                return Err(Error::Parse {
                    line: ln,
                    message: "expected \"color x y z\"".into(),
                });
            }
            let color: usize = f[0].parse().map_err(|_| Error::Parse {
                line: ln,
                message: format!("bad color {:?}", f[0]),
            })?;
            if color >= colors {
                return Err(Error::Parse {
                    line: ln,
                    message: format!("color {color} outside palette of size {colors}"),
                });
            }
            let mut r = [0.0; 3];
            for (x, s) in r.iter_mut().zip(&f[1..]) {
                *x = s
                    .parse()
                    .ok()
                    .filter(|v: &f64| v.is_finite())
                    .ok_or(Error::Parse {
                        line: ln,
                        message: format!("bad coordinate {s:?}"),
                    })?;
            }
            points.push((color, r));
        }
        out.push(ColoredConfig::new(colors, points)?);
    }
    Ok(out)
}

pub fn to_config_file(config: &ColoredConfig) -> String {
    let mut s = format!("{} {}\n", config.len(), config.n_colors());
    for (c, r) in config.points() {
        s.push_str(&format!("{c} {:?} {:?} {:?}\n", r[0], r[1], r[2]));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_round_trip() {
        let c = ColoredConfig::new(3, vec![(2, [0.1, -2.5, 1e-3]), (0, [1.0 / 3.0, 0.0, 7.25])])
            .unwrap();
        assert_eq!(parse_config_file(&to_config_file(&c)).unwrap(), c);
    }

    #[test]
    fn empty_file_body_is_empty_config() {
        assert!(parse_config_file("0 2\n").unwrap().is_empty());
    }

    #[test]
    fn errors_name_the_line() {
        let cases = [
            ("2 2\n0 0 0 0\n5 1 1 1\n", 3),
            ("# comment\n1 2\nx 0 0 0\n", 3),
            ("2 1\n0 0 0 0\n", 1),
            ("1 1\n0 0 nan 0\n", 2),
            ("1\n", 1),
        ];
        for (text, line) in cases {
            match parse_config_file(text) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn pool_holds_several() {
        let pool = parse_config_pool("1 1\n0 1 0 0\n\n2 1\n0 0 1 0\n0 0 0 1\n").unwrap();
        assert_eq!(pool.iter().map(|c| c.len()).collect::<Vec<_>>(), vec![1, 2]);
    }
}
