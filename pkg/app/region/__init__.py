# Region module - Experimental region geometry and prediction
