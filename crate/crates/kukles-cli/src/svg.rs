//! Minimal SVG emitter for phase portraits: fixed 800×600 viewbox,
//! trajectories as polylines, singularities as glyphs by kind, limit cycles
//! stroked distinctly.

use std::fmt::Write as _;

use kukles::cycles::{LimitCycle, Stability};
use kukles::model::{Singularity, SingularityKind, State};
use kukles::scan::{OrbitKind, PortraitOrbit, Window};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;

pub struct SvgPortrait<'a> {
    pub window: Window,
    pub orbits: &'a [PortraitOrbit],
    pub singularities: &'a [Singularity],
    pub cycles: &'a [(LimitCycle, Vec<State>)],
}

impl SvgPortrait<'_> {
    fn map(&self, s: State) -> (f64, f64) {
        let w = &self.window;
        let x = (s.x - w.x_min) / (w.x_max - w.x_min) * WIDTH;
        let y = HEIGHT - (s.y - w.y_min) / (w.y_max - w.y_min) * HEIGHT;
        (x, y)
    }

    fn polyline(&self, out: &mut String, pts: impl Iterator<Item = State>, style: &str) {
        let coords: Vec<String> = pts
            .map(|s| {
                let (x, y) = self.map(s);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        if coords.len() < 2 {
            return;
        }
        let _ = writeln!(
            out,
            r#"<polyline fill="none" {style} points="{}"/>"#,
            coords.join(" ")
        );
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}">"#
        );
        let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);

        for orbit in self.orbits {
            let style = match orbit.kind {
                OrbitKind::Seed { .. } => r##"stroke="#9aa0a6" stroke-width="0.8""##,
                OrbitKind::Separatrix(_) => r##"stroke="#e8710a" stroke-width="1.4""##,
            };
            self.polyline(
                &mut out,
                orbit.trajectory.samples.iter().map(|(_, s)| *s),
                style,
            );
        }

        for (cycle, polyline) in self.cycles {
            let style = match cycle.stability {
                Stability::Stable => r##"stroke="#1a73e8" stroke-width="2.0""##,
                Stability::Unstable => {
                    r##"stroke="#d93025" stroke-width="2.0" stroke-dasharray="6 4""##
                }
                Stability::SemiStableCandidate => {
                    r##"stroke="#9334e6" stroke-width="2.0" stroke-dasharray="2 3""##
                }
            };
            self.polyline(&mut out, polyline.iter().copied(), style);
        }

        for s in self.singularities {
            let (x, y) = self.map(s.location);
            match s.kind {
                SingularityKind::Saddle => {
                    let _ = writeln!(
                        out,
                        r#"<path d="M {x0} {y0} L {x1} {y1} M {x0} {y1} L {x1} {y0}" stroke="black" stroke-width="1.6"/>"#,
                        x0 = x - 5.0,
                        x1 = x + 5.0,
                        y0 = y - 5.0,
                        y1 = y + 5.0
                    );
                }
                SingularityKind::Center => {
                    let _ = writeln!(
                        out,
                        r#"<circle cx="{x:.2}" cy="{y:.2}" r="5" fill="none" stroke="black" stroke-width="1.6"/>"#
                    );
                }
                SingularityKind::AntiSaddleFocus => {
                    let _ = writeln!(
                        out,
                        r#"<circle cx="{x:.2}" cy="{y:.2}" r="4" fill="black"/>"#
                    );
                }
                SingularityKind::AntiSaddleNode => {
                    let _ = writeln!(
                        out,
                        r#"<rect x="{:.2}" y="{:.2}" width="8" height="8" fill="black"/>"#,
                        x - 4.0,
                        y - 4.0
                    );
                }
                SingularityKind::SaddleNode => {
                    let _ = writeln!(
                        out,
                        r#"<path d="M {x} {y0} L {x1} {y1} L {x0} {y1} Z" fill="none" stroke="black" stroke-width="1.6"/>"#,
                        x0 = x - 5.0,
                        x1 = x + 5.0,
                        y0 = y - 5.0,
                        y1 = y + 4.0
                    );
                }
                SingularityKind::Degenerate | SingularityKind::Infinite => {
                    let _ = writeln!(
                        out,
                        r#"<path d="M {x} {y0} L {x1} {y} L {x} {y1} L {x0} {y} Z" fill="none" stroke="black" stroke-width="1.4"/>"#,
                        x0 = x - 5.0,
                        x1 = x + 5.0,
                        y0 = y - 5.0,
                        y1 = y + 5.0
                    );
                }
            }
        }

        out.push_str("</svg>\n");
        out
    }
}
