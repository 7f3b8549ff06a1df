use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use super::{
    open_playback_file, CanSimDevice, Device, Endpoint, EndpointSpec, LoopbackDevice,
    TransportError, UdpDevice,
};

/// Builds a device from the plugin-specific options string.
pub type DeviceFactory =
    Arc<dyn Fn(&str) -> Result<Box<dyn Device>, TransportError> + Send + Sync>;

/// Protocol name to plugin factory map.
pub struct Registry {
    factories: RwLock<HashMap<String, DeviceFactory>>,
}

impl Default for Registry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl Registry {
    pub fn empty() -> Self {
        Registry {
            factories: RwLock::new(HashMap::new()),
        }
    }

    /// Registry with the in-tree plugins: `loopback`, `cansim`, `can`,
    /// `udp` and `playback`.
    ///
    /// `can` is bound to the simulated bus; a hardware adapter can replace it
    /// with [`Registry::register`].
    pub fn with_builtins() -> Self {
        let reg = Self::empty();
        reg.register("loopback", |opts| {
            Ok(Box::new(LoopbackDevice::open(opts)) as Box<dyn Device>)
        });
        reg.register("cansim", |opts| {
            Ok(Box::new(CanSimDevice::open(opts)) as Box<dyn Device>)
        });
        reg.register("can", |opts| {
            Ok(Box::new(CanSimDevice::open(opts)) as Box<dyn Device>)
        });
        reg.register("udp", |opts| {
            Ok(Box::new(UdpDevice::open(opts)?) as Box<dyn Device>)
        });
        reg.register("playback", |opts| {
            if opts.is_empty() {
                return Err(TransportError::Options {
                    protocol: "playback".into(),
                    reason: "a file path is required".into(),
                });
            }
            open_playback_file(opts)
        });
        reg
    }

    /// Registers a plugin. Registering an existing protocol replaces it.
    pub fn register<F>(&self, protocol: &str, factory: F)
    where
        F: Fn(&str) -> Result<Box<dyn Device>, TransportError> + Send + Sync + 'static,
    {
        let key = protocol.trim().to_ascii_lowercase();
        let mut map = self.factories.write().unwrap_or_else(|e| e.into_inner());
        if map.insert(key.clone(), Arc::new(factory)).is_some() {
            log::warn!("protocol '{key}' registered twice; replacing previous plugin");
        }
    }

    pub fn contains(&self, protocol: &str) -> bool {
        self.factories
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .contains_key(protocol)
    }

    pub fn protocols(&self) -> Vec<String> {
        let map = self.factories.read().unwrap_or_else(|e| e.into_inner());
        let mut names: Vec<_> = map.keys().cloned().collect();
        names.sort();
        names
    }

    pub fn open(&self, spec: &EndpointSpec, blocking: bool) -> Result<Endpoint, TransportError> {
        let factory = {
            let map = self.factories.read().unwrap_or_else(|e| e.into_inner());
            map.get(&spec.protocol)
                .cloned()
                .ok_or_else(|| TransportError::UnknownProtocol(spec.protocol.clone()))?
        };
        let device = factory(&spec.options)?;
        Ok(Endpoint::from_device(device, blocking))
    }
}

fn global() -> &'static Registry {
    static GLOBAL: OnceLock<Registry> = OnceLock::new();
    GLOBAL.get_or_init(Registry::with_builtins)
}

/// Registers a plugin with the process-wide registry.
pub fn register<F>(protocol: &str, factory: F)
where
    F: Fn(&str) -> Result<Box<dyn Device>, TransportError> + Send + Sync + 'static,
{
    global().register(protocol, factory)
}

/// Opens an endpoint through the process-wide registry.
pub fn open(spec: &EndpointSpec, blocking: bool) -> Result<Endpoint, TransportError> {
    global().open(spec, blocking)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::parse_endpoint_spec;

    #[test]
    fn unknown_protocol_names_plugin() {
        let reg = Registry::with_builtins();
        let err = reg
            .open(&parse_endpoint_spec("nosuch").unwrap(), false)
            .unwrap_err();
        assert_eq!(err.to_string(), "unknown protocol 'nosuch'");
    }

    #[test]
    fn loopback_echoes() {
        let reg = Registry::with_builtins();
        let mut ep = reg
            .open(&parse_endpoint_spec("loopback").unwrap(), false)
            .unwrap();
        assert_eq!(ep.write(&[1, 2, 3]).unwrap(), 3);
        assert_eq!(ep.read(16).unwrap(), vec![1, 2, 3]);
    }

    #[test]
    fn last_registration_wins() {
        let reg = Registry::empty();
        reg.register("x", |_| Err(TransportError::Unsupported("first")));
        reg.register("x", |_| Ok(Box::new(LoopbackDevice::open("")) as Box<dyn Device>));
        assert!(reg.open(&EndpointSpec::new("x", "").unwrap(), false).is_ok());
        assert_eq!(reg.protocols(), vec!["x".to_string()]);
    }

    #[test]
    fn cansim_endpoints_share_a_bus() {
        let reg = Registry::with_builtins();
        let spec = parse_endpoint_spec("cansim,registry-test-bus").unwrap();
        let mut a = reg.open(&spec, false).unwrap();
        let mut b = reg.open(&spec, false).unwrap();
        a.write(&[0x23, 0x01, 0xAA, 0xBB]).unwrap();
        assert_eq!(b.read(16).unwrap(), vec![0x23, 0x01, 0xAA, 0xBB]);
        // the sender does not hear its own frame
        assert!(a.read(16).unwrap().is_empty());
    }

    #[test]
    fn concurrent_opens() {
        let reg = Arc::new(Registry::with_builtins());
        let handles: Vec<_> = (0..8)
            .map(|i| {
                let reg = Arc::clone(&reg);
                std::thread::spawn(move || {
                    let spec = EndpointSpec::new("loopback", &format!("conc-{i}")).unwrap();
                    reg.open(&spec, false).map(|_| ())
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap().unwrap();
        }
    }
}
