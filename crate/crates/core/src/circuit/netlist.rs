use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::cells::{Cell, CellKind};
use crate::error::{Error, Result};

/// Net tied to logic 0.
pub const CONST0: &str = "const0";
/// Net tied to logic 1.
pub const CONST1: &str = "const1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub name: String,
    pub cell: CellKind,
    /// Pin name to net name, for every input and output pin of the cell.
    pub pins: BTreeMap<String, String>,
}

impl Instance {
    pub fn new(name: impl Into<String>, cell: CellKind, pins: &[(&str, &str)]) -> Self {
        Instance {
            name: name.into(),
            cell,
            pins: pins.iter().map(|(p, n)| (p.to_string(), n.to_string())).collect(),
        }
    }
}

/// A pMOS transistor bound to the net driving its gate.
#[derive(Debug, Clone, PartialEq)]
pub struct Device {
    pub id: String,
    pub instance: usize,
    pub gate_net: usize,
}

/// Combinational gate-level netlist, validated and levelized at construction.
#[derive(Debug, Clone)]
pub struct Netlist {
    name: String,
    primary_inputs: Vec<String>,
    primary_outputs: Vec<String>,
    instances: Vec<Instance>,
    net_names: Vec<String>,
    input_nets: Vec<usize>,
    output_nets: Vec<usize>,
    inst_in: Vec<Vec<usize>>,
    inst_out: Vec<Vec<usize>>,
    net_driver: Vec<Option<usize>>,
    order: Vec<usize>,
    devices: Vec<Device>,
}

/// On-disk JSON form. `cells` documents the library cells used; instances
/// reference them by name.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetlistJson {
    pub name: String,
    pub cells: Vec<Cell>,
    pub instances: Vec<Instance>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
}

impl Netlist {
    pub fn new(
        name: impl Into<String>,
        primary_inputs: Vec<String>,
        primary_outputs: Vec<String>,
        instances: Vec<Instance>,
    ) -> Result<Self> {
        let mut net_index: HashMap<String, usize> = HashMap::new();
        let mut net_names = Vec::new();
        let mut driver: Vec<Option<usize>> = Vec::new();
        let mut intern = |name: &str, net_names: &mut Vec<String>, driver: &mut Vec<Option<usize>>| {
            *net_index.entry(name.to_string()).or_insert_with(|| {
                net_names.push(name.to_string());
                driver.push(None);
                net_names.len() - 1
            })
        };

        for c in [CONST0, CONST1] {
            intern(c, &mut net_names, &mut driver);
        }
        let mut input_nets = Vec::new();
        for pi in &primary_inputs {
            if pi == CONST0 || pi == CONST1 {
                return Err(Error::Netlist(format!("'{pi}' is reserved")));
            }
            let idx = intern(pi, &mut net_names, &mut driver);
            if input_nets.contains(&idx) {
                return Err(Error::Netlist(format!("duplicate primary input '{pi}'")));
            }
            input_nets.push(idx);
        }

        let mut names_seen = HashMap::new();
        let mut inst_out = Vec::with_capacity(instances.len());
        for (i, inst) in instances.iter().enumerate() {
            if names_seen.insert(inst.name.clone(), i).is_some() {
                return Err(Error::Netlist(format!("duplicate instance name '{}'", inst.name)));
            }
            for pin in inst.pins.keys() {
                let kind = inst.cell;
                if !kind.inputs().contains(&pin.as_str()) && !kind.outputs().contains(&pin.as_str()) {
                    return Err(Error::Netlist(format!(
                        "instance '{}' has no pin '{pin}' on {}",
                        inst.name,
                        kind.name()
                    )));
                }
            }
            let mut outs = Vec::new();
            for pin in inst.cell.outputs() {
                let net = inst.pins.get(*pin).ok_or_else(|| {
                    Error::Netlist(format!("instance '{}' leaves output {pin} unbound", inst.name))
                })?;
                outs.push(net.clone());
            }
            for node in inst.cell.internals() {
                outs.push(format!("{}/{node}", inst.name));
            }
            let mut idxs = Vec::with_capacity(outs.len());
            for net in outs {
                let idx = intern(&net, &mut net_names, &mut driver);
                if idx < 2 || input_nets.contains(&idx) || driver[idx].is_some() {
                    return Err(Error::Netlist(format!("net '{net}' has more than one driver")));
                }
                driver[idx] = Some(i);
                idxs.push(idx);
            }
            inst_out.push(idxs);
        }

        let mut inst_in = Vec::with_capacity(instances.len());
        for inst in &instances {
            let mut idxs = Vec::new();
            for pin in inst.cell.inputs() {
                let net = inst.pins.get(*pin).ok_or_else(|| {
                    Error::Netlist(format!("instance '{}' leaves input {pin} unbound", inst.name))
                })?;
                let idx = *net_index.get(net.as_str()).ok_or_else(|| Error::UnconnectedNet(net.clone()))?;
                if idx >= 2 && !input_nets.contains(&idx) && driver[idx].is_none() {
                    return Err(Error::UnconnectedNet(net.clone()));
                }
                idxs.push(idx);
            }
            inst_in.push(idxs);
        }

        let mut output_nets = Vec::new();
        for po in &primary_outputs {
            let idx = *net_index.get(po.as_str()).ok_or_else(|| Error::UnconnectedNet(po.clone()))?;
            output_nets.push(idx);
        }

        // Kahn levelization, stable in declaration order
        let n = instances.len();
        let mut indeg = vec![0usize; n];
        let mut fanout: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, ins) in inst_in.iter().enumerate() {
            for &net in ins {
                if let Some(d) = driver[net] {
                    indeg[i] += 1;
                    fanout[d].push(i);
                }
            }
        }
        let mut ready: std::collections::BTreeSet<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = ready.pop_first() {
            order.push(i);
            for &j in &fanout[i] {
                indeg[j] -= 1;
                if indeg[j] == 0 {
                    ready.insert(j);
                }
            }
        }
        if order.len() != n {
            return Err(Error::Netlist("combinational loop detected".into()));
        }

        let mut devices = Vec::new();
        for (i, inst) in instances.iter().enumerate() {
            let n_out = inst.cell.outputs().len();
            for (k, gate) in inst.cell.pmos_gates().iter().enumerate() {
                let gate_net = if let Some(p) = inst.cell.inputs().iter().position(|p| p == gate) {
                    inst_in[i][p]
                } else {
                    let p = inst.cell.internals().iter().position(|p| p == gate).expect("library gate");
                    inst_out[i][n_out + p]
                };
                devices.push(Device { id: format!("{}/MP{k}", inst.name), instance: i, gate_net });
            }
        }

        Ok(Netlist {
            name: name.into(),
            primary_inputs,
            primary_outputs,
            instances,
            net_names,
            input_nets,
            output_nets,
            inst_in,
            inst_out,
            net_driver: driver,
            order,
            devices,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn primary_inputs(&self) -> &[String] {
        &self.primary_inputs
    }

    pub fn primary_outputs(&self) -> &[String] {
        &self.primary_outputs
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn devices(&self) -> &[Device] {
        &self.devices
    }

    pub fn net_name(&self, net: usize) -> &str {
        &self.net_names[net]
    }

    /// Instance indices in evaluation order.
    pub fn topological_order(&self) -> &[usize] {
        &self.order
    }

    /// Instances driving the inputs of instance `i`.
    pub fn fanin_instances(&self, i: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.inst_in[i].iter().filter_map(|&net| self.net_driver[net]).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub(crate) fn net_count(&self) -> usize {
        self.net_names.len()
    }

    /// Evaluates every net for one input vector (values in primary-input order).
    pub fn eval_nets(&self, inputs: &[bool], nets: &mut Vec<bool>) -> Result<()> {
        if inputs.len() != self.input_nets.len() {
            return Err(Error::invalid(format!(
                "netlist '{}' expects {} inputs, got {}",
                self.name,
                self.input_nets.len(),
                inputs.len()
            )));
        }
        nets.clear();
        nets.resize(self.net_count(), false);
        nets[1] = true;
        for (&net, &v) in self.input_nets.iter().zip(inputs) {
            nets[net] = v;
        }
        let mut x = Vec::with_capacity(5);
        for &i in &self.order {
            x.clear();
            x.extend(self.inst_in[i].iter().map(|&n| nets[n]));
            let y = self.instances[i].cell.eval(&x);
            for (&net, v) in self.inst_out[i].iter().zip(y) {
                nets[net] = v;
            }
        }
        Ok(())
    }

    /// Primary output values for one input vector.
    pub fn evaluate(&self, inputs: &[bool]) -> Result<Vec<bool>> {
        let mut nets = Vec::new();
        self.eval_nets(inputs, &mut nets)?;
        Ok(self.output_nets.iter().map(|&n| nets[n]).collect())
    }

    pub fn to_json(&self) -> NetlistJson {
        let mut kinds: Vec<CellKind> = self.instances.iter().map(|i| i.cell).collect();
        kinds.sort();
        kinds.dedup();
        NetlistJson {
            name: self.name.clone(),
            cells: kinds.into_iter().map(CellKind::describe).collect(),
            instances: self.instances.clone(),
            inputs: self.primary_inputs.clone(),
            outputs: self.primary_outputs.clone(),
        }
    }

    pub fn from_json(doc: NetlistJson) -> Result<Self> {
        for cell in &doc.cells {
            let kind = CellKind::from_name(&cell.name)
                .ok_or_else(|| Error::schema(format!("unknown cell '{}'", cell.name)))?;
            if kind.describe() != *cell {
                return Err(Error::schema(format!("cell '{}' differs from the library", cell.name)));
            }
        }
        Netlist::new(doc.name, doc.inputs, doc.outputs, doc.instances)
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_json())?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let doc: NetlistJson = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Self::from_json(doc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn unconnected_net_named() {
        let inst = Instance::new("g0", CellKind::Nand2, &[("A", "a"), ("B", "floating"), ("Y", "y")]);
        let err = Netlist::new("t", s(&["a"]), s(&["y"]), vec![inst]).unwrap_err();
        assert!(matches!(&err, Error::UnconnectedNet(n) if n == "floating"), "{err}");
        assert!(err.to_string().contains("floating"));
    }

    #[test]
    fn loops_and_double_drivers_rejected() {
        let a = Instance::new("g0", CellKind::Inv, &[("A", "y1"), ("Y", "y0")]);
        let b = Instance::new("g1", CellKind::Inv, &[("A", "y0"), ("Y", "y1")]);
        assert!(Netlist::new("t", vec![], s(&["y0"]), vec![a, b]).is_err());

        let a = Instance::new("g0", CellKind::Inv, &[("A", "x"), ("Y", "y")]);
        let b = Instance::new("g1", CellKind::Inv, &[("A", "x"), ("Y", "y")]);
        assert!(Netlist::new("t", s(&["x"]), s(&["y"]), vec![a, b]).is_err());
    }

    #[test]
    fn out_of_order_instances_are_levelized() {
        let late = Instance::new("g1", CellKind::Inv, &[("A", "m"), ("Y", "y")]);
        let early = Instance::new("g0", CellKind::Inv, &[("A", "x"), ("Y", "m")]);
        let nl = Netlist::new("t", s(&["x"]), s(&["y"]), vec![late, early]).unwrap();
        assert_eq!(nl.topological_order(), &[1, 0]);
        assert_eq!(nl.evaluate(&[true]).unwrap(), vec![true]);
        assert_eq!(nl.fanin_instances(0), vec![1]);
    }

    #[test]
    fn constants_and_internal_gates() {
        let g = Instance::new("b", CellKind::Buf, &[("A", CONST1), ("Y", "y")]);
        let nl = Netlist::new("t", vec![], s(&["y"]), vec![g]).unwrap();
        assert_eq!(nl.evaluate(&[]).unwrap(), vec![true]);
        let ids: Vec<&str> = nl.devices().iter().map(|d| d.id.as_str()).collect();
        assert_eq!(ids, ["b/MP0", "b/MP1"]);
        assert_eq!(nl.net_name(nl.devices()[1].gate_net), "b/n");
    }
}
