use crate::error::{Error, Result};

pub const NUM_CLASSES: usize = 8;

pub const CLASS_NAMES: [&str; NUM_CLASSES] = [
    "background",
    "skull",
    "teeth",
    "cerebrum",
    "cerebellum",
    "nasal cavities",
    "eyeballs",
    "lenses",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Class {
    Background = 0,
    Skull = 1,
    Teeth = 2,
    Cerebrum = 3,
    Cerebellum = 4,
    NasalCavities = 5,
    Eyeballs = 6,
    Lenses = 7,
}

/// `H×W` grid of class indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    height: usize,
    width: usize,
    values: Vec<u8>,
}

impl LabelMap {
    pub fn filled(height: usize, width: usize, class: u8) -> Self {
        Self {
            height,
            width,
            values: vec![class; height * width],
        }
    }

    /// Builds a map, rejecting any value `>= NUM_CLASSES`.
    pub fn from_values(height: usize, width: usize, values: Vec<u8>) -> Result<Self> {
        Self::with_classes(height, width, values, NUM_CLASSES)
    }

    pub fn with_classes(height: usize, width: usize, values: Vec<u8>, num_classes: usize) -> Result<Self> {
        if height == 0 || width == 0 || values.len() != height * width {
            return Err(Error::InvalidShape(format!(
                "{height}x{width} label map cannot hold {} values",
                values.len()
            )));
        }
        if let Some(&bad) = values.iter().find(|&&v| v as usize >= num_classes) {
            return Err(Error::Label {
                label: bad as usize,
                num_classes,
            });
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.values[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, class: u8) {
        self.values[row * self.width + col] = class;
    }

    pub fn histogram(&self) -> [usize; NUM_CLASSES] {
        let mut h = [0; NUM_CLASSES];
        for &v in &self.values {
            h[v as usize] += 1;
        }
        h
    }

    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Result<Self> {
        if top + height > self.height || left + width > self.width {
            return Err(Error::Shape(format!(
                "crop {height}x{width} at ({top},{left}) exceeds {}x{}",
                self.height, self.width
            )));
        }
        let values = (top..top + height)
            .flat_map(|r| self.values[r * self.width + left..r * self.width + left + width].iter().copied())
            .collect();
        Ok(Self {
            height,
            width,
            values,
        })
    }
}
