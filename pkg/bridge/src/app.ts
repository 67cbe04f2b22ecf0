import express, { Express, Request, Response, NextFunction } from 'express';
import { existsSync } from 'node:fs';
import { join } from 'node:path';

import { embedText, stubCaption } from './stub.js';

export type Backend = 'stub' | 'model';

export interface BridgeConfig {
  backend: Backend;
  // Directory mapping video_id -> media file; only the model backend uses it.
  mediaRoot?: string;
}

interface CaptionBody {
  video_id: string;
  start: number;
  end: number;
  instruction: string;
}

function validateCaptionBody(body: unknown): string | CaptionBody {
  if (typeof body !== 'object' || body === null) return 'body must be a JSON object';
  const record = body as Record<string, unknown>;
  for (const field of ['video_id', 'start', 'end', 'instruction']) {
    if (!(field in record)) return `missing field '${field}'`;
  }
  if (typeof record.video_id !== 'string' || !record.video_id) {
    return `field 'video_id' must be a non-empty string`;
  }
  if (typeof record.start !== 'number' || typeof record.end !== 'number') {
    return `fields 'start' and 'end' must be numbers`;
  }
  if (typeof record.instruction !== 'string' || !record.instruction) {
    return `field 'instruction' must be a non-empty string`;
  }
  return record as unknown as CaptionBody;
}

function resolveMedia(mediaRoot: string | undefined, videoId: string): string | null {
  if (!mediaRoot) return null;
  for (const ext of ['.mp4', '.mkv', '.avi', '.webm', '']) {
    const candidate = join(mediaRoot, videoId + ext);
    if (existsSync(candidate)) return candidate;
  }
  return null;
}

export function createApp(config: BridgeConfig): Express {
  const app = express();
  app.use(express.json());

  // express.json() failures (bad JSON) become protocol-level 400s
  app.use((err: Error, _req: Request, res: Response, next: NextFunction) => {
    if (err) {
      res.status(400).json({ error: `malformed JSON body: ${err.message}` });
      return;
    }
    next();
  });

  app.get('/healthz', (_req, res) => {
    res.json({ status: 'ok', backend: config.backend });
  });

  app.post('/caption', (req, res) => {
    const parsed = validateCaptionBody(req.body);
    if (typeof parsed === 'string') {
      res.status(400).json({ error: parsed });
      return;
    }
    if (config.backend === 'stub') {
      res.json({
        caption: stubCaption(parsed.video_id, parsed.start, parsed.end, parsed.instruction),
      });
      return;
    }
    const media = resolveMedia(config.mediaRoot, parsed.video_id);
    if (media === null) {
      res.status(404).json({ error: `unknown video_id '${parsed.video_id}'` });
      return;
    }
    // Wiring a real captioning model is an operator concern; the bridge
    // ships without model weights.
    res.status(503).json({ error: 'model backend not loaded' });
  });

  app.post('/embed', (req, res) => {
    const body = req.body as Record<string, unknown> | null;
    const text = body && typeof body.text === 'string' ? body.text : null;
    if (!text || !text.trim()) {
      res.status(400).json({ error: `missing or empty field 'text'` });
      return;
    }
    if (config.backend === 'stub') {
      res.json({ vector: embedText(text) });
      return;
    }
    res.status(503).json({ error: 'model backend not loaded' });
  });

  return app;
}
