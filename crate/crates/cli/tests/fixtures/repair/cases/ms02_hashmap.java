package lib;

import org.junit.Test;
import static org.junit.Assert.*;

public class CalcTest {
    @Test
    public void signsByName() {
        Calc calc = new Calc();
        HashMap<String, Integer> values = new HashMap<>();
        values.put("one", 1);
        assertEquals("positive", calc.sign(values.get("one")));
    }
}
