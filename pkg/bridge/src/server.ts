import { parseArgs } from 'node:util';

import { createApp, Backend } from './app.js';

const { values } = parseArgs({
  options: {
    host: { type: 'string', default: '127.0.0.1' },
    port: { type: 'string', default: '8763' },
    backend: { type: 'string', default: 'stub' },
    'media-root': { type: 'string' },
  },
});

const backend = values.backend as Backend;
if (backend !== 'stub' && backend !== 'model') {
  console.error(`unknown backend '${values.backend}' (expected stub or model)`);
  process.exit(2);
}

const app = createApp({ backend, mediaRoot: values['media-root'] });
const server = app.listen(Number(values.port), values.host as string, () => {
  const address = server.address();
  const port = typeof address === 'object' && address ? address.port : values.port;
  // Machine-readable startup line; test harnesses parse the port from it.
  console.log(`chatvtg-bridge listening on ${values.host}:${port} backend=${backend}`);
});
