import { Client } from "./api";
import { POLL_MS, setup } from "./app";

const handles = setup(document, new Client());
setInterval(() => void handles.tick(), POLL_MS);
