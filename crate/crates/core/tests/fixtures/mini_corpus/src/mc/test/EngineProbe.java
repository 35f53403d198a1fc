package mc.test;

import org.slf4j.Logger;
import org.slf4j.LoggerFactory;

/**
 * Test-only probe; must never appear in the scanned index.
 */
public class EngineProbe {
    private static final Logger LOG = LoggerFactory.getLogger(EngineProbe.class);

    public void poke() {
        LOG.error("probe fired, this log must not be indexed");
    }
}
