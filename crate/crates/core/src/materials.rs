//! Built-in dispersion table and the plain-text format it is stored in.
//!
//! The bundled table (`data/materials.txt`) covers vacuum, SiO2, Si3N4, HfO2
//! and Si between 600 and 1000 nm. Indices are real; absorbing media are not
//! represented.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::OnceLock;

use crate::error::{Error, Result};

const BUILTIN_TABLE: &str = include_str!("../data/materials.txt");

/// A material evaluated at one vacuum wavelength.
#[derive(Debug, Clone, PartialEq)]
pub struct Material {
    pub name: String,
    pub refractive_index: f64,
}

impl Material {
    pub fn new(name: impl Into<String>, refractive_index: f64) -> Result<Self> {
        let name = name.into();
        if !(refractive_index >= 1.0) || !refractive_index.is_finite() {
            return Err(Error::InvalidInput(format!(
                "material `{name}` has refractive index {refractive_index}, expected >= 1"
            )));
        }
        Ok(Self {
            name,
            refractive_index,
        })
    }

    /// Looks `name` up in the built-in table.
    pub fn lookup(name: &str, wavelength_nm: f64) -> Result<Self> {
        let n = material_index(name, wavelength_nm)?;
        Ok(Self {
            name: name.to_string(),
            refractive_index: n,
        })
    }

    pub fn vacuum() -> Self {
        Self {
            name: "vacuum".into(),
            refractive_index: 1.0,
        }
    }
}

impl fmt::Display for Material {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (n={:.5})", self.name, self.refractive_index)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispersionEntry {
    pub name: String,
    pub source: String,
    pub wavelengths_nm: Vec<f64>,
    pub indices: Vec<f64>,
}

impl DispersionEntry {
    pub fn index_at(&self, wavelength_nm: f64) -> Result<f64> {
        let (first, last) = (self.wavelengths_nm[0], *self.wavelengths_nm.last().unwrap());
        if !(wavelength_nm >= first && wavelength_nm <= last) {
            return Err(Error::WavelengthOutOfRange {
                material: self.name.clone(),
                wavelength_nm,
                min_nm: first,
                max_nm: last,
            });
        }
        let upper = self
            .wavelengths_nm
            .partition_point(|&w| w < wavelength_nm)
            .max(1);
        let (w0, w1) = (self.wavelengths_nm[upper - 1], self.wavelengths_nm[upper]);
        let (n0, n1) = (self.indices[upper - 1], self.indices[upper]);
        let t = (wavelength_nm - w0) / (w1 - w0);
        Ok(n0 + t * (n1 - n0))
    }
}

/// A parsed material table, keyed by material name.
#[derive(Debug, Clone, Default)]
pub struct MaterialTable {
    entries: BTreeMap<String, DispersionEntry>,
}

impl MaterialTable {
    pub fn builtin() -> &'static MaterialTable {
        static TABLE: OnceLock<MaterialTable> = OnceLock::new();
        TABLE.get_or_init(|| {
            MaterialTable::parse(BUILTIN_TABLE).expect("bundled material table is well-formed")
        })
    }

    pub fn get(&self, name: &str) -> Result<&DispersionEntry> {
        self.entries
            .get(name)
            .ok_or_else(|| Error::UnknownMaterial(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn index(&self, name: &str, wavelength_nm: f64) -> Result<f64> {
        self.get(name)?.index_at(wavelength_nm)
    }

    /// Parses the `key = value` block format documented in `data/materials.txt`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut table = MaterialTable::default();
        let mut current: Option<(usize, BTreeMap<&str, &str>)> = None;

        let flush = |table: &mut MaterialTable,
                     block: Option<(usize, BTreeMap<&str, &str>)>|
         -> Result<()> {
            let Some((line, kv)) = block else {
                return Ok(());
            };
            let get = |key: &str| {
                kv.get(key).copied().ok_or_else(|| Error::Parse {
                    line,
                    message: format!("material block is missing `{key}`"),
                })
            };
            let name = get("material")?.to_string();
            let source = kv.get("source").copied().unwrap_or("").to_string();
            let wavelengths_nm = parse_list(get("wavelength_nm")?, line)?;
            let indices = parse_list(get("index")?, line)?;
            if wavelengths_nm.len() != indices.len() || wavelengths_nm.len() < 2 {
                return Err(Error::Parse {
                    line,
                    message: format!(
                        "`{name}`: need matching wavelength and index lists with at least two points"
                    ),
                });
            }
            if wavelengths_nm.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Parse {
                    line,
                    message: format!("`{name}`: wavelengths must be strictly increasing"),
                });
            }
            if indices.iter().any(|&n| !(n >= 1.0)) {
                return Err(Error::Parse {
                    line,
                    message: format!("`{name}`: refractive indices must be >= 1"),
                });
            }
            if table.entries.contains_key(&name) {
                return Err(Error::Parse {
                    line,
                    message: format!("duplicate material `{name}`"),
                });
            }
            table.entries.insert(
                name.clone(),
                DispersionEntry {
                    name,
                    source,
                    wavelengths_nm,
                    indices,
                },
            );
            Ok(())
        };

        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: line_no,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "material" => {
                    flush(&mut table, current.take())?;
                    let mut kv = BTreeMap::new();
                    kv.insert("material", value);
                    current = Some((line_no, kv));
                }
                "source" | "wavelength_nm" | "index" => match current.as_mut() {
                    Some((_, kv)) => {
                        kv.insert(key, value);
                    }
                    None => {
                        return Err(Error::Parse {
                            line: line_no,
                            message: format!("`{key}` before any `material` line"),
                        })
                    }
                },
                other => {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("unknown key `{other}`"),
                    })
                }
            }
        }
        flush(&mut table, current.take())?;
        Ok(table)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# picatom material table, format version 1\n");
        for e in self.entries.values() {
            let join = |v: &[f64]| {
                v.iter()
                    .map(|x| format!("{x}"))
                    .collect::<Vec<_>>()
                    .join(", ")
            };
            out.push_str(&format!(
                "\nmaterial = {}\nsource = {}\nwavelength_nm = {}\nindex = {}\n",
                e.name,
                e.source,
                join(&e.wavelengths_nm),
                join(&e.indices)
            ));
        }
        out
    }
}

fn parse_list(s: &str, line: usize) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim().parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("`{}` is not a number", t.trim()),
            })
        })
        .collect()
}

/// Refractive index of a built-in material at a vacuum wavelength.
pub fn material_index(name: &str, wavelength_nm: f64) -> Result<f64> {
    MaterialTable::builtin().index(name, wavelength_nm)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vacuum_is_one() {
        assert_eq!(material_index("vacuum", 780.0).unwrap(), 1.0);
    }

    #[test]
    fn silica_at_780() {
        // Malitson Sellmeier evaluated at 0.78 um gives 1.453671.
        let n = material_index("SiO2", 780.0).unwrap();
        assert!((n - 1.4537).abs() < 1e-4, "{n}");
    }

    #[test]
    fn nitride_at_780() {
        let n = material_index("Si3N4", 780.0).unwrap();
        assert!((1.99..=2.02).contains(&n), "{n}");
    }

    #[test]
    fn interpolates_between_grid_points() {
        let a = material_index("SiO2", 780.0).unwrap();
        let b = material_index("SiO2", 800.0).unwrap();
        let mid = material_index("SiO2", 790.0).unwrap();
        assert!((mid - 0.5 * (a + b)).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            material_index("unobtainium", 780.0),
            Err(Error::UnknownMaterial(_))
        ));
        assert!(matches!(
            material_index("SiO2", 1550.0),
            Err(Error::WavelengthOutOfRange { .. })
        ));
    }

    #[test]
    fn text_round_trip() {
        let t = MaterialTable::builtin();
        let again = MaterialTable::parse(&t.to_text()).unwrap();
        for name in t.names() {
            assert_eq!(t.get(name).unwrap(), again.get(name).unwrap());
        }
    }

    #[test]
    fn rejects_malformed_blocks() {
        let bad = "material = X\nwavelength_nm = 700, 800\nindex = 1.5\n";
        assert!(matches!(MaterialTable::parse(bad), Err(Error::Parse { .. })));
        let bad = "wavelength_nm = 700\n";
        assert!(matches!(MaterialTable::parse(bad), Err(Error::Parse { line: 1, .. })));
        let bad = "material = X\nwavelength_nm = 700, 800\nindex = 0.5, 1.5\n";
        assert!(MaterialTable::parse(bad).is_err());
    }
}
