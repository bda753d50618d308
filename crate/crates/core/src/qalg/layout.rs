use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_DIM_CAP: usize = 4096;
pub const DIM_CAP_ENV: &str = "ONESHOT_QCAP_DIM_CAP";

/// Largest total Hilbert-space dimension any layout may have.
pub fn dim_cap() -> usize {
    std::env::var(DIM_CAP_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&c| c > 0)
        .unwrap_or(DEFAULT_DIM_CAP)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Register {
    pub label: String,
    pub dim: usize,
}

/// Ordered, uniquely labelled registers. The first register is the most
/// significant factor of the Kronecker index.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Register>", into = "Vec<Register>")]
pub struct SystemLayout {
    registers: Vec<Register>,
}

impl TryFrom<Vec<Register>> for SystemLayout {
    type Error = Error;
    fn try_from(registers: Vec<Register>) -> Result<Self> {
        Self::from_registers(registers)
    }
}

impl From<SystemLayout> for Vec<Register> {
    fn from(l: SystemLayout) -> Self {
        l.registers
    }
}

impl SystemLayout {
    pub fn new<I, S>(regs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, usize)>,
        S: Into<String>,
    {
        Self::from_registers(
            regs.into_iter()
                .map(|(label, dim)| Register {
                    label: label.into(),
                    dim,
                })
                .collect(),
        )
    }

    pub fn single(label: impl Into<String>, dim: usize) -> Result<Self> {
        Self::new([(label.into(), dim)])
    }

    /// The empty layout, a one-dimensional space.
    pub fn trivial() -> Self {
        Self::default()
    }

    pub fn from_registers(registers: Vec<Register>) -> Result<Self> {
        for (i, r) in registers.iter().enumerate() {
            if r.dim == 0 {
                return Err(Error::RegisterDim {
                    label: r.label.clone(),
                    expected: 1,
                    found: 0,
                });
            }
            if r.label.is_empty() {
                return Err(Error::UnknownLabel(String::new()));
            }
            if registers[..i].iter().any(|o| o.label == r.label) {
                return Err(Error::LabelCollision(r.label.clone()));
            }
        }
        let layout = Self { registers };
        layout.total_dim_checked()?;
        Ok(layout)
    }

    fn total_dim_checked(&self) -> Result<usize> {
        let cap = dim_cap();
        let mut d: usize = 1;
        for r in &self.registers {
            d = d.checked_mul(r.dim).ok_or(Error::DimensionCap {
                dim: usize::MAX,
                cap,
            })?;
        }
        if d > cap {
            return Err(Error::DimensionCap { dim: d, cap });
        }
        Ok(d)
    }

    pub fn registers(&self) -> &[Register] {
        &self.registers
    }

    pub fn len(&self) -> usize {
        self.registers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.registers.is_empty()
    }

    pub fn total_dim(&self) -> usize {
        self.registers.iter().map(|r| r.dim).product()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.registers.iter().map(|r| r.dim).collect()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.registers.iter().map(|r| r.label.as_str()).collect()
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.registers.iter().position(|r| r.label == label)
    }

    pub fn contains(&self, label: &str) -> bool {
        self.position(label).is_some()
    }

    pub fn dim_of(&self, label: &str) -> Result<usize> {
        self.position(label)
            .map(|i| self.registers[i].dim)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn concat(&self, other: &SystemLayout) -> Result<Self> {
        let mut regs = self.registers.clone();
        regs.extend(other.registers.iter().cloned());
        Self::from_registers(regs)
    }

    /// Registers named in `labels`, in the order given.
    pub fn select<S: AsRef<str>>(&self, labels: &[S]) -> Result<Self> {
        let regs = labels
            .iter()
            .map(|l| {
                let l = l.as_ref();
                self.position(l)
                    .map(|i| self.registers[i].clone())
                    .ok_or_else(|| Error::UnknownLabel(l.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_registers(regs)
    }

    /// Registers named in `labels`, in this layout's order.
    pub fn restrict<S: AsRef<str>>(&self, labels: &[S]) -> Result<Self> {
        for l in labels {
            if !self.contains(l.as_ref()) {
                return Err(Error::UnknownLabel(l.as_ref().to_string()));
            }
        }
        Ok(Self {
            registers: self
                .registers
                .iter()
                .filter(|r| labels.iter().any(|l| l.as_ref() == r.label))
                .cloned()
                .collect(),
        })
    }

    /// Registers not named in `labels`, in this layout's order.
    pub fn without<S: AsRef<str>>(&self, labels: &[S]) -> Self {
        Self {
            registers: self
                .registers
                .iter()
                .filter(|r| !labels.iter().any(|l| l.as_ref() == r.label))
                .cloned()
                .collect(),
        }
    }

    pub fn relabel<F: Fn(&str) -> String>(&self, f: F) -> Result<Self> {
        Self::from_registers(
            self.registers
                .iter()
                .map(|r| Register {
                    label: f(&r.label),
                    dim: r.dim,
                })
                .collect(),
        )
    }

    /// True when both layouts hold the same registers, in any order.
    pub fn same_registers(&self, other: &SystemLayout) -> bool {
        self.len() == other.len()
            && self
                .registers
                .iter()
                .all(|r| other.dim_of(&r.label).map(|d| d == r.dim).unwrap_or(false))
    }

    /// Checks that every register here appears in `other` with the same dimension.
    pub fn check_subset_of(&self, other: &SystemLayout) -> Result<()> {
        for r in &self.registers {
            let d = other.dim_of(&r.label)?;
            if d != r.dim {
                return Err(Error::RegisterDim {
                    label: r.label.clone(),
                    expected: d,
                    found: r.dim,
                });
            }
        }
        Ok(())
    }

    pub fn is_disjoint(&self, other: &SystemLayout) -> bool {
        self.registers.iter().all(|r| !other.contains(&r.label))
    }
}

impl std::fmt::Display for SystemLayout {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[")?;
        for (i, r) in self.registers.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}:{}", r.label, r.dim)?;
        }
        write!(f, "]")
    }
}
